//! Versioned run configuration. Every field has a default, so a config file
//! only lists what it changes; command-line flags override the file.

use std::path::PathBuf;

use anyhow::{bail, ensure};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use drcc_cbm::baselines::BaselineKind;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Z2Arg {
    Exact,
    Sample,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads for studies; defaults to the available cores.
    pub workers: Option<usize>,
    pub solver: SolverSection,
    pub generate: GenerateSection,
    pub calibrate: CalibrateSection,
    pub solve: SolveSection,
    pub study: StudySection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 1,
            out: PathBuf::from("out"),
            workers: None,
            solver: SolverSection::default(),
            generate: GenerateSection::default(),
            calibrate: CalibrateSection::default(),
            solve: SolveSection::default(),
            study: StudySection::default(),
            bench: BenchSection::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(self.solver.time_limit > 0.0, "time limit must be positive");
        ensure!(self.solver.gap >= 0.0, "MIP gap must be non-negative");
        ensure!(self.solver.threads >= 1, "solver threads must be at least 1");
        ensure!(self.workers != Some(0), "workers must be at least 1");
        if let Some(d) = self.solve.delta {
            ensure!(d >= 0.0, "delta must be non-negative, got {d}");
        }
        if let Some(p) = &self.solve.input {
            if !p.exists() {
                bail!("input file {} does not exist", p.display());
            }
        }
        ensure!(self.solve.turbines >= 1, "need at least one turbine");
        ensure!(self.solve.samples >= 1, "scenario count must be at least 1");
        self.solve.kind()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub backend: String,
    /// Seconds.
    pub time_limit: f64,
    pub gap: f64,
    pub threads: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            backend: "highs".into(),
            time_limit: 600.0,
            gap: 1e-4,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    /// `sparse`, `abundant` or a signal count per type.
    pub preset: String,
}

impl Default for GenerateSection {
    fn default() -> Self {
        GenerateSection { preset: "sparse".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub samples: usize,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection {
            samples: drcc_cbm::presets::CALIBRATION_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    /// Snapshot JSON (`instance`, `rlds`); generated from `turbines` if unset.
    pub input: Option<PathBuf>,
    pub turbines: usize,
    pub policy: String,
    /// Overrides the radius carried by `policy`.
    pub delta: Option<f64>,
    pub z2: Z2Arg,
    pub samples: usize,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            input: None,
            turbines: 5,
            policy: "drcc:0.1".into(),
            delta: None,
            z2: Z2Arg::Exact,
            samples: 500,
        }
    }
}

impl SolveSection {
    pub fn kind(&self) -> anyhow::Result<BaselineKind> {
        let k: BaselineKind = self.policy.parse()?;
        Ok(match (k, self.delta) {
            (_, None) => k,
            (BaselineKind::Saa, Some(d)) | (BaselineKind::Drcc { .. }, Some(d)) => BaselineKind::Drcc { delta: d },
            (BaselineKind::Robust { .. }, Some(d)) => BaselineKind::Robust { delta: d },
            (BaselineKind::Sequential { .. }, Some(d)) => BaselineKind::Sequential { delta: d },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    /// `study-4.1`, `study-4.2` or `study-4.3`.
    pub preset: String,
    /// Replications per cell (instances for `study-4.3`).
    pub replications: Option<usize>,
    pub turbines: Option<usize>,
    pub sim_days: Option<usize>,
    /// Scenario counts compared in `study-4.3`.
    pub sample_sizes: Vec<usize>,
    /// Machines per regression instance in `study-4.3`.
    pub regression_machines: usize,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            preset: "study-4.1".into(),
            replications: None,
            turbines: None,
            sim_days: None,
            sample_sizes: vec![50, 100, 200, 400],
            regression_machines: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub delta: f64,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            sizes: vec![25, 50, 75, 100],
            repeats: 3,
            delta: 0.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let s = toml::to_string_pretty(&c).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&s).unwrap(), c);
    }

    #[test]
    fn partial_file_and_overrides() {
        let c: RunConfig = toml::from_str("seed = 9\n[solve]\npolicy = \"saa\"\ndelta = 0.2\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.solve.kind().unwrap(), BaselineKind::Drcc { delta: 0.2 });
        assert!(toml::from_str::<RunConfig>("sed = 9\n").is_err());
        let mut bad = RunConfig::default();
        bad.solve.delta = Some(-1.0);
        assert!(bad.validate().is_err());
    }
}
