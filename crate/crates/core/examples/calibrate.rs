//! Regenerates the calibrated drift means shipped in `presets`.

use drcc_cbm::degradation::mean_lifetime;
use drcc_cbm::presets::{calibrate_types, CALIBRATION_SAMPLES, CALIBRATION_SEED, TARGET_LIFETIMES};

fn main() -> drcc_cbm::Result<()> {
    let types = calibrate_types(CALIBRATION_SAMPLES, CALIBRATION_SEED)?;
    for (l, p) in types.iter().enumerate() {
        let check = mean_lifetime(p, 1000, 7)?;
        println!(
            "type {l}: log drift mean {:.6} (target {} days, holdout mean {check:.1})",
            p.log_beta_prior.0, TARGET_LIFETIMES[l]
        );
    }
    Ok(())
}
