//! File formats: signal CSVs, dataset manifests, parameter matrices and
//! generic JSON/CSV helpers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::degradation::{ComponentTypeParams, DegradationSignal};
use crate::dro::PrecomputedParams;
use crate::{Error, Result};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    log::error!("{}: {e}", path.display());
    Error::Csv(e)
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    log::error!("{}: {e}", path.display());
    Error::Json(e)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| json_err(path, e))?;
    fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| json_err(path, e))
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SignalRow {
    component_type: usize,
    signal_id: usize,
    t: f64,
    #[serde(rename = "S")]
    s: f64,
}

/// One row per sample: `component_type, signal_id, t, S`.
pub fn write_signals_csv(path: &Path, signals: &[DegradationSignal]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for (i, sig) in signals.iter().enumerate() {
        for &(t, s) in &sig.samples {
            w.serialize(SignalRow {
                component_type: sig.type_id,
                signal_id: i,
                t,
                s,
            })
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Raw sample paths keyed by `(component_type, signal_id)`, in time order.
pub fn read_signals_csv(path: &Path) -> Result<BTreeMap<(usize, usize), Vec<(f64, f64)>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for row in r.deserialize::<SignalRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        out.entry((row.component_type, row.signal_id)).or_default().push((row.t, row.s));
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(out)
}

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub params: ComponentTypeParams,
    pub n_signals: usize,
    pub seed: u64,
    /// Signal file, relative to the manifest.
    pub signals: PathBuf,
    /// Full signals including hidden failure times and realised parameters.
    pub truth: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub types: Vec<DatasetEntry>,
}

/// Writes `manifest.json`, `signals_type<l>.csv` and `truth_type<l>.json` for
/// each spare type into `dir`.
pub fn write_dataset(dir: &Path, seed: u64, datasets: &[(ComponentTypeParams, u64, Vec<DegradationSignal>)]) -> Result<DatasetManifest> {
    ensure_dir(dir)?;
    let mut types = Vec::new();
    for (p, s, sigs) in datasets {
        let signals = PathBuf::from(format!("signals_type{}.csv", p.type_id));
        let truth = PathBuf::from(format!("truth_type{}.json", p.type_id));
        write_signals_csv(&dir.join(&signals), sigs)?;
        write_json(&dir.join(&truth), sigs)?;
        types.push(DatasetEntry {
            params: p.clone(),
            n_signals: sigs.len(),
            seed: *s,
            signals,
            truth,
        });
    }
    let m = DatasetManifest {
        version: MANIFEST_VERSION,
        seed,
        types,
    };
    write_json(&dir.join("manifest.json"), &m)?;
    Ok(m)
}

/// Loads a dataset written by [`write_dataset`]: full training signals per type.
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<Vec<DegradationSignal>>)> {
    let m: DatasetManifest = read_json(&dir.join("manifest.json"))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::Parse(format!("unsupported manifest version {}", m.version)));
    }
    let sigs = m
        .types
        .iter()
        .map(|e| read_json::<Vec<DegradationSignal>>(&dir.join(&e.truth)))
        .collect::<Result<Vec<_>>>()?;
    Ok((m, sigs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ParamRow {
    component: usize,
    t: usize,
    psi: f64,
    u: bool,
    p_bar: f64,
    t_star: usize,
}

/// Long-format table of `psi`, `u` and `p_bar` per component and epoch.
pub fn write_params_csv(path: &Path, p: &PrecomputedParams) -> Result<()> {
    let mut rows = Vec::new();
    for j in 0..p.n_components() {
        for t in 1..=p.t_max() {
            rows.push(ParamRow {
                component: j,
                t,
                psi: p.psi[j][t - 1],
                u: p.u(j, t),
                p_bar: p.p_bar[j][t - 1],
                t_star: p.t_star[j],
            });
        }
    }
    write_csv_rows(path, &rows)
}
