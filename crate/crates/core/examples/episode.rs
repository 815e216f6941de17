//! Runs one desk-scale episode per policy and prints its KPIs.

use std::time::Instant;

use drcc_cbm::baselines::BaselineKind;
use drcc_cbm::harness::{run_episode, training_priors, EpisodeConfig};
use drcc_cbm::presets::{component_types, wind_farm, DESK_EPISODE_DAYS, DESK_TURBINES};

fn main() -> drcc_cbm::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let policy: BaselineKind = args.first().map(String::as_str).unwrap_or("saa").parse()?;
    let training: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let types = component_types();
    let priors = training_priors(&types, training, seed)?;
    let cfg = EpisodeConfig::new(wind_farm(DESK_TURBINES), types, policy, DESK_EPISODE_DAYS);
    let start = Instant::now();
    let ep = run_episode(&cfg, &priors, seed)?;
    println!("{policy} n={training} seed={seed}: {:.1}s", start.elapsed().as_secs_f64());
    println!("{:?}", ep.kpis);
    println!("ledger {:?} integrity {}", ep.ledger, ep.integrity_ok());
    Ok(())
}
