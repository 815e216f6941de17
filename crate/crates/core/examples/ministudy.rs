//! Small version of a study preset: `ministudy <preset> <replications> [training]`.

use drcc_cbm::harness::run_study;
use drcc_cbm::degradation::calibrate_drift;
use drcc_cbm::presets::{study_by_name, uncalibrated_type, CALIBRATION_SEED, TARGET_LIFETIMES};

fn main() -> drcc_cbm::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = study_by_name(args.first().map(String::as_str).unwrap_or("study-4.1")).expect("known preset");
    cfg.replications = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    if let Some(n) = args.get(2).and_then(|s| s.parse::<usize>().ok()) {
        cfg.cells.retain(|c| c.training_size == n);
    }
    // Optional noise overrides for calibration experiments; drift means are
    // recalibrated in-process when any override is set.
    let env = |k: &str| std::env::var(k).ok().and_then(|v| v.parse::<f64>().ok());
    let (bm, sd2, sd1) = (env("BM_SIGMA"), env("LOG_BETA_SD"), env("LOG_THETA_SD"));
    if bm.is_some() || sd2.is_some() || sd1.is_some() {
        cfg.types = (0..3)
            .map(|l| {
                let mut p = uncalibrated_type(l);
                p.bm_sigma = bm.unwrap_or(p.bm_sigma);
                p.log_beta_prior.1 = sd2.unwrap_or(p.log_beta_prior.1);
                p.log_theta_prior.1 = sd1.unwrap_or(p.log_theta_prior.1);
                calibrate_drift(&p, TARGET_LIFETIMES[l], 500, CALIBRATION_SEED)
            })
            .collect::<drcc_cbm::Result<Vec<_>>>()?;
        println!("{:?}", cfg.types.iter().map(|p| p.log_beta_prior).collect::<Vec<_>>());
    }
    let res = run_study(&cfg)?;
    for c in &res.cells {
        let Some(r) = &c.report else {
            println!("{}: all failed", c.cell);
            continue;
        };
        println!(
            "{:<22} pm {:>6.2}  cost/day {:>7.3} ± {:.3}  viol {:.3}  failed {}",
            c.cell,
            r.pct_pm.map_or(f64::NAN, |s| s.mean),
            r.cost_per_day.mean,
            r.cost_per_day.std_err,
            r.avg_cc_violation.map_or(f64::NAN, |s| s.mean),
            c.failed
        );
    }
    Ok(())
}
