//! Shipped configurations: the three calibrated component types, the wind-farm
//! instance template and the study grids.
//!
//! The drift means below were produced by [`calibrate_types`] with
//! `CALIBRATION_SAMPLES` signals and `CALIBRATION_SEED`. The `calibrate`
//! example regenerates them after any other field changes.

use std::time::Duration;

use crate::baselines::BaselineKind;
use crate::degradation::{calibrate_drift, ComponentTypeParams};
use crate::dro::MaintenanceCosts;
use crate::harness::{StudyCell, StudyConfig};
use crate::milp::SolveOptions;
use crate::model::{ComponentSpec, MachineSpec, ProblemInstance, SpareTypeSpec, SupplierCapacity, Z2Mode};
use crate::prognostics::EmpiricalRld;
use crate::rng::stream;
use crate::Result;

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Target mean lifetimes in days (6, 8 and 9 months).
pub const TARGET_LIFETIMES: [f64; 3] = [180.0, 240.0, 270.0];
pub const SPARSE_TRAINING: usize = 5;
pub const ABUNDANT_TRAINING: usize = 50;
pub const CALIBRATION_SAMPLES: usize = 2000;
pub const CALIBRATION_SEED: u64 = 20240601;

const CALIBRATED_LOG_DRIFT: [f64; 3] = [-3.530_343, -3.818_812, -3.936_529];

/// Type `l` before drift calibration. Phase I covers 40-60% of the target
/// life; the initial Phase-II level sits at 1.5 and failure is at 20.
pub fn uncalibrated_type(l: usize) -> ComponentTypeParams {
    let life = TARGET_LIFETIMES[l];
    ComponentTypeParams {
        type_id: l,
        phi: 1.0,
        tau_range: (0.4 * life, 0.6 * life),
        log_theta_prior: (1.5f64.ln(), 0.1),
        log_beta_prior: (-3.5, 0.1),
        bm_sigma: 0.03,
        failure_threshold: 20.0,
        dt: 1.0,
        tau_max: 3.0 * life,
        time_cap: None,
    }
}

/// Reruns the Monte-Carlo drift calibration for all three types.
pub fn calibrate_types(n: usize, seed: u64) -> Result<Vec<ComponentTypeParams>> {
    (0..3)
        .map(|l| calibrate_drift(&uncalibrated_type(l), TARGET_LIFETIMES[l], n, seed))
        .collect()
}

/// The three calibrated wind-turbine component types.
pub fn component_types() -> Vec<ComponentTypeParams> {
    (0..3)
        .map(|l| {
            let mut p = uncalibrated_type(l);
            p.log_beta_prior.0 = CALIBRATED_LOG_DRIFT[l];
            p
        })
        .collect()
}

pub fn turbine_costs() -> MaintenanceCosts {
    MaintenanceCosts {
        c_pr: 1.3,
        v_pr: 0.13,
        c_co: 7.8,
        v_co: 0.78,
    }
}

/// Wind farm of `turbines` machines with one component of each type, using
/// the case-study cost and risk constants (currency in thousands).
pub fn wind_farm(turbines: usize) -> ProblemInstance {
    let components = (0..turbines)
        .flat_map(|k| {
            (0..3).map(move |l| ComponentSpec {
                machine: k,
                spare_type: l,
                costs: turbine_costs(),
            })
        })
        .collect();
    ProblemInstance {
        components,
        machines: vec![MachineSpec { c_down: 2.0 }; turbines],
        spare_types: vec![
            SpareTypeSpec {
                c_hold: 0.1,
                c_reg: 1.5,
                c_exp: 6.0,
                initial_stock: 1,
                in_flight: Vec::new(),
            };
            3
        ],
        t_max: 50,
        freeze: 20,
        lead_time: 20,
        crew_capacity: None,
        supplier_capacity: SupplierCapacity::Constant(30.0),
        c_crew: 40.0,
        b_reg: 3.0,
        rho: 5.0,
        gamma: 7,
        eps: 0.1,
        beta: 0.1,
    }
}

pub const DESK_TURBINES: usize = 5;
pub const DESK_EPISODE_DAYS: usize = 200;
pub const DESK_REPLICATIONS: usize = 20;

fn study(name: &str, cells: Vec<StudyCell>) -> StudyConfig {
    StudyConfig {
        name: name.into(),
        cells,
        replications: DESK_REPLICATIONS,
        base_seed: 41,
        sim_days: DESK_EPISODE_DAYS,
        types: component_types(),
        template: wind_farm(DESK_TURBINES),
        z2: Z2Mode::Exact,
        rld_samples: crate::prognostics::DEFAULT_RLD_SAMPLES,
        initial_life_fraction: (0.0, 0.8),
        solve: SolveOptions {
            time_limit: Duration::from_secs(120),
            mip_gap: 1e-4,
            seed: 0,
            threads: 1,
        },
        solver: "highs".into(),
        workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    }
}

/// SAA, DRCC at two radii and the robust planner under sparse and abundant
/// training.
pub fn study_4_1() -> StudyConfig {
    let policies = [
        BaselineKind::Saa,
        BaselineKind::Drcc { delta: 0.1 },
        BaselineKind::Drcc { delta: 0.2 },
        BaselineKind::Robust { delta: 0.0 },
    ];
    let cells = [SPARSE_TRAINING, ABUNDANT_TRAINING]
        .iter()
        .flat_map(|&n| {
            let tag = if n == SPARSE_TRAINING { "sparse" } else { "abundant" };
            policies.iter().map(move |&p| StudyCell {
                label: format!("{tag}/{p}"),
                policy: p,
                training_size: n,
            })
        })
        .collect();
    study("study-4.1", cells)
}

/// Joint versus sequential planning at zero radius with abundant training.
pub fn study_4_2() -> StudyConfig {
    let cells = vec![
        StudyCell {
            label: "joint".into(),
            policy: BaselineKind::Drcc { delta: 0.0 },
            training_size: ABUNDANT_TRAINING,
        },
        StudyCell {
            label: "sequential".into(),
            policy: BaselineKind::Sequential { delta: 0.0 },
            training_size: ABUNDANT_TRAINING,
        },
    ];
    study("study-4.2", cells)
}

pub fn study_by_name(name: &str) -> Option<StudyConfig> {
    match name {
        "study-4.1" => Some(study_4_1()),
        "study-4.2" => Some(study_4_2()),
        _ => None,
    }
}

/// Wasted life is dear and failures cheap, so late repairs pay off and the
/// failure-count constraint has something to cut.
const REGRESSION_COSTS: MaintenanceCosts = MaintenanceCosts {
    c_pr: 1.0,
    v_pr: 0.5,
    c_co: 2.5,
    v_co: 0.3,
};

/// Small synthetic instance for regression checks: `machines` machines with
/// three components each, two spare types, a 20-epoch horizon and a tight
/// failure-count constraint (`gamma = 1`). RLDs are `n` normal draws around
/// means spread over `[3, 30]` so the failure-count constraint binds.
pub fn regression_instance(machines: usize, n: usize, seed: u64) -> Result<(ProblemInstance, Vec<EmpiricalRld>)> {
    let mut rng = stream(seed, &[0xe9]);
    let nj = 3 * machines;
    let components = (0..nj)
        .map(|j| ComponentSpec {
            machine: j / 3,
            spare_type: j % 2,
            costs: REGRESSION_COSTS,
        })
        .collect();
    let inst = ProblemInstance {
        components,
        machines: vec![MachineSpec { c_down: 8.0 }; machines],
        spare_types: vec![
            SpareTypeSpec {
                c_hold: 0.1,
                c_reg: 1.5,
                c_exp: 6.0,
                initial_stock: 1,
                in_flight: vec![0, 1, 0, 0, 0],
            };
            2
        ],
        t_max: 20,
        freeze: 10,
        lead_time: 5,
        crew_capacity: None,
        supplier_capacity: SupplierCapacity::Constant(4.0),
        c_crew: 25.0,
        b_reg: 3.0,
        rho: 3.0,
        gamma: 1,
        eps: 0.1,
        beta: 0.1,
    };
    let tau_max = 100.0;
    let rlds = (0..nj)
        .map(|_| {
            let mean: f64 = rng.random_range(3.0..30.0);
            let sd: f64 = rng.random_range(0.5..4.0);
            let d = Normal::new(mean, sd).expect("positive sd");
            EmpiricalRld::from_samples((0..n).map(|_| d.sample(&mut rng)).collect(), tau_max)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((inst, rlds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::mean_lifetime;

    #[test]
    fn calibrated_types_hit_targets() {
        for (l, p) in component_types().iter().enumerate() {
            p.validate().unwrap();
            let m = mean_lifetime(p, 1000, 7).unwrap();
            let target = TARGET_LIFETIMES[l];
            assert!((m - target).abs() < 0.1 * target, "type {l}: mean {m} vs {target}");
        }
    }

    #[test]
    fn wind_farm_shape() {
        let w = wind_farm(5);
        w.validate().unwrap();
        assert_eq!(w.n_components(), 15);
        assert_eq!(w.machine_members(4), vec![12, 13, 14]);
        assert_eq!(w.spare_members(1).len(), 5);
    }

    #[test]
    fn study_grids() {
        assert_eq!(study_4_1().cells.len(), 8);
        assert_eq!(study_4_2().cells[1].policy, BaselineKind::Sequential { delta: 0.0 });
        assert!(study_by_name("study-9").is_none());
    }

    #[test]
    fn regression_instances_are_valid() {
        let (inst, rlds) = regression_instance(2, 40, 3).unwrap();
        inst.validate().unwrap();
        assert_eq!(rlds.len(), 6);
        assert!(rlds.iter().all(|r| r.len() == 40));
        assert_eq!(regression_instance(2, 40, 3).unwrap().1, rlds);
    }
}
