use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use drcc_cbm::baselines::plan;
use drcc_cbm::degradation::generate_dataset;
use drcc_cbm::harness::{self, Snapshot};
use drcc_cbm::io::{ensure_dir, read_json, write_csv_rows, write_dataset, write_json, write_params_csv};
use drcc_cbm::milp::{backend, SolveOptions};
use drcc_cbm::model::{verify_solution, Z2Mode};
use drcc_cbm::presets;
use drcc_cbm::rng::derive_seed;
use drcc_cbm::Error;

mod config;

use config::{RunConfig, Z2Arg, CONFIG_VERSION};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;
const EXIT_BACKEND: u8 = 4;
const EXIT_Z2_VIOLATED: u8 = 5;
const EXIT_CELL_FAILED: u8 = 6;

#[derive(Parser, Debug)]
#[command(name = "drcc-cbm", version, about = "Joint condition-based maintenance and spare provisioning under RLD ambiguity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Solver time limit in seconds.
    #[arg(long = "time-limit", global = true)]
    time_limit: Option<f64>,
    /// Relative MIP gap.
    #[arg(long, global = true)]
    gap: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate training signals for the three component types.
    Generate {
        /// `sparse` (5 signals per type), `abundant` (50) or a number.
        #[arg(long, default_value = "sparse")]
        preset: String,
    },
    /// Re-run the Monte-Carlo drift calibration.
    Calibrate {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Solve one instance and verify the solution.
    Solve(SolveArgs),
    /// Run a study preset.
    Study {
        #[arg(long, default_value = "study-4.1")]
        preset: String,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long = "S", value_delimiter = ',')]
        samples: Option<Vec<usize>>,
    },
    /// Time exact-mode solves over instance sizes.
    Bench {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Snapshot JSON with `instance` and `rlds`; a wind-farm snapshot is
    /// generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Turbines in the generated snapshot.
    #[arg(long)]
    turbines: Option<usize>,
    /// Policy: saa, drcc:<delta>, robust[:<delta>], sequential[:<delta>].
    #[arg(long)]
    policy: Option<String>,
    /// Normalised radius; overrides the radius in `--policy`.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    z2: Option<Z2Arg>,
    /// Scenario count for `--z2 sample`.
    #[arg(long = "S")]
    samples: Option<usize>,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let err = e.into();
        let code = match err.downcast_ref::<Error>() {
            Some(Error::BackendUnavailable(_)) => EXIT_BACKEND,
            Some(Error::Infeasible(_)) => EXIT_INFEASIBLE,
            _ => EXIT_ERROR,
        };
        Failure { code, err }
    }
}

fn fail(code: u8, msg: String) -> Failure {
    Failure {
        code,
        err: anyhow::anyhow!(msg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let s = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let cfg: RunConfig = toml::from_str(&s).with_context(|| format!("parsing config {}", p.display()))?;
            if cfg.version != CONFIG_VERSION {
                bail!("config {} has version {}, expected {CONFIG_VERSION}", p.display(), cfg.version);
            }
            cfg
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(w) = common.workers {
        cfg.workers = Some(w);
    }
    if let Some(t) = common.time_limit {
        cfg.solver.time_limit = t;
    }
    if let Some(g) = common.gap {
        cfg.solver.gap = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        time_limit: Duration::from_secs_f64(cfg.solver.time_limit),
        mip_gap: cfg.solver.gap,
        seed: cfg.seed,
        threads: cfg.solver.threads,
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Generate { preset } => {
            cfg.generate.preset = preset;
            echo(&cfg)?;
            cmd_generate(&cfg)
        }
        Command::Calibrate { samples } => {
            if let Some(n) = samples {
                cfg.calibrate.samples = n;
            }
            echo(&cfg)?;
            cmd_calibrate(&cfg)
        }
        Command::Solve(a) => {
            let s = &mut cfg.solve;
            if a.input.is_some() {
                s.input = a.input;
            }
            if let Some(t) = a.turbines {
                s.turbines = t;
            }
            if let Some(p) = a.policy {
                s.policy = p;
            }
            if a.delta.is_some() {
                s.delta = a.delta;
            }
            if let Some(z) = a.z2 {
                s.z2 = z;
            }
            if let Some(n) = a.samples {
                s.samples = n;
            }
            cfg.validate()?;
            echo(&cfg)?;
            cmd_solve(&cfg)
        }
        Command::Study {
            preset,
            replications,
            samples,
        } => {
            cfg.study.preset = preset;
            if replications.is_some() {
                cfg.study.replications = replications;
            }
            if let Some(s) = samples {
                cfg.study.sample_sizes = s;
            }
            echo(&cfg)?;
            cmd_study(&cfg)
        }
        Command::Bench { sizes, repeats } => {
            if let Some(s) = sizes {
                cfg.bench.sizes = s;
            }
            if let Some(r) = repeats {
                cfg.bench.repeats = r;
            }
            echo(&cfg)?;
            cmd_bench(&cfg)
        }
    }
}

fn echo(cfg: &RunConfig) -> anyhow::Result<()> {
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("config.toml");
    std::fs::write(&path, toml::to_string_pretty(cfg)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_generate(cfg: &RunConfig) -> Result<(), Failure> {
    let n = match cfg.generate.preset.as_str() {
        "sparse" => presets::SPARSE_TRAINING,
        "abundant" => presets::ABUNDANT_TRAINING,
        other => other
            .parse()
            .map_err(|_| fail(EXIT_ERROR, format!("unknown dataset preset `{other}`")))?,
    };
    let types = presets::component_types();
    let mut sets = Vec::new();
    for p in &types {
        let s = derive_seed(cfg.seed, &[p.type_id as u64]);
        sets.push((p.clone(), s, generate_dataset(p, n, s)?));
    }
    let m = write_dataset(&cfg.out, cfg.seed, &sets)?;
    info!("wrote {} types x {n} signals to {}", m.types.len(), cfg.out.display());
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<(), Failure> {
    let types = presets::calibrate_types(cfg.calibrate.samples, cfg.seed)?;
    write_json(&cfg.out.join("component_types.json"), &types)?;
    for p in &types {
        println!("type {}: log drift mean {:.6}", p.type_id, p.log_beta_prior.0);
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveReport<'a> {
    policy: String,
    objective: f64,
    planned_cost: &'a drcc_cbm::model::CostBreakdown,
    verification: &'a drcc_cbm::model::VerificationReport,
}

fn cmd_solve(cfg: &RunConfig) -> Result<(), Failure> {
    let s = &cfg.solve;
    let solver = backend(&cfg.solver.backend)?;
    let snap: Snapshot = match &s.input {
        Some(p) => read_json(p)?,
        None => harness::snapshot(
            &presets::wind_farm(s.turbines),
            &presets::component_types(),
            presets::ABUNDANT_TRAINING,
            drcc_cbm::prognostics::DEFAULT_RLD_SAMPLES,
            (0.3, 0.95),
            cfg.seed,
        )?,
    };
    let kind = s.kind()?;
    let z2 = match s.z2 {
        Z2Arg::Exact => Z2Mode::Exact,
        Z2Arg::Off => Z2Mode::Off,
        Z2Arg::Sample => Z2Mode::SampleBased {
            samples: s.samples,
            seed: cfg.seed,
        },
    };
    write_json(&cfg.out.join("snapshot.json"), &snap)?;
    let p = plan(kind, &snap.instance, &snap.rlds, z2, solver.as_ref(), &solve_options(cfg))?;
    let rep = verify_solution(&snap.instance, &p.params, &p.solution);
    write_params_csv(&cfg.out.join("params.csv"), &p.params)?;
    write_json(&cfg.out.join("solution.json"), &p)?;
    write_json(
        &cfg.out.join("verification.json"),
        &SolveReport {
            policy: kind.to_string(),
            objective: p.objective(),
            planned_cost: &p.planned_cost,
            verification: &rep,
        },
    )?;
    println!("{kind}: objective {:.4}, status {:?}", p.objective(), p.solution.status);
    if let Some(prob) = rep.z2_probability {
        println!("exact P(at most {} unexpected failures) = {prob:.6}", snap.instance.gamma);
    }
    if !rep.passed() {
        for v in &rep.violations {
            eprintln!("violation: {v}");
        }
        return Err(fail(EXIT_VERIFICATION, format!("{} verification failures", rep.violations.len())));
    }
    if rep.z2_exact_feasible == Some(false) {
        return Err(fail(EXIT_Z2_VIOLATED, "schedule breaks the exact failure-count constraint".into()));
    }
    Ok(())
}

fn cmd_study(cfg: &RunConfig) -> Result<(), Failure> {
    let st = &cfg.study;
    if st.preset == "study-4.3" {
        return cmd_z2_study(cfg);
    }
    let mut sc = presets::study_by_name(&st.preset).ok_or_else(|| fail(EXIT_ERROR, format!("unknown study `{}`", st.preset)))?;
    sc.base_seed = cfg.seed;
    sc.solve = solve_options(cfg);
    sc.solver = cfg.solver.backend.clone();
    if let Some(r) = st.replications {
        sc.replications = r;
    }
    if let Some(w) = cfg.workers {
        sc.workers = w;
    }
    if let Some(t) = st.turbines {
        sc.template = presets::wind_farm(t);
    }
    if let Some(d) = st.sim_days {
        sc.sim_days = d;
    }
    let res = harness::run_study(&sc)?;
    write_csv_rows(&cfg.out.join("replications.csv"), &res.rows)?;
    let agg: Vec<AggregateRow> = res.cells.iter().map(AggregateRow::from).collect();
    write_csv_rows(&cfg.out.join("aggregate.csv"), &agg)?;
    write_json(&cfg.out.join("summary.json"), &res.cells)?;
    for a in &agg {
        println!(
            "{:<24} pm {:>7.2}  cost/day {:>8.4} [{:.4}, {:.4}]  violation {:.3}  ({} ok, {} failed)",
            a.cell, a.pct_pm, a.cost_per_day, a.cost_ci_lo, a.cost_ci_hi, a.avg_cc_violation, a.completed, a.failed
        );
    }
    let dead: Vec<&str> = res.cells.iter().filter(|c| c.completed == 0).map(|c| c.cell.as_str()).collect();
    if !dead.is_empty() {
        return Err(fail(EXIT_CELL_FAILED, format!("cells with no successful replication: {}", dead.join(", "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct AggregateRow {
    cell: String,
    completed: usize,
    failed: usize,
    pct_pm: f64,
    pct_pm_se: f64,
    cost_per_day: f64,
    cost_se: f64,
    cost_ci_lo: f64,
    cost_ci_hi: f64,
    avg_cc_violation: f64,
    avg_cc_violation_se: f64,
}

impl From<&harness::CellSummary> for AggregateRow {
    fn from(c: &harness::CellSummary) -> Self {
        let r = c.report.as_ref();
        let pm = r.and_then(|r| r.pct_pm);
        let cost = r.map(|r| r.cost_per_day);
        let v = r.and_then(|r| r.avg_cc_violation);
        AggregateRow {
            cell: c.cell.clone(),
            completed: c.completed,
            failed: c.failed,
            pct_pm: pm.map_or(f64::NAN, |s| s.mean),
            pct_pm_se: pm.map_or(f64::NAN, |s| s.std_err),
            cost_per_day: cost.map_or(f64::NAN, |s| s.mean),
            cost_se: cost.map_or(f64::NAN, |s| s.std_err),
            cost_ci_lo: cost.map_or(f64::NAN, |s| s.ci95.0),
            cost_ci_hi: cost.map_or(f64::NAN, |s| s.ci95.1),
            avg_cc_violation: v.map_or(f64::NAN, |s| s.mean),
            avg_cc_violation_se: v.map_or(f64::NAN, |s| s.std_err),
        }
    }
}

fn cmd_z2_study(cfg: &RunConfig) -> Result<(), Failure> {
    let st = &cfg.study;
    let solver = backend(&cfg.solver.backend)?;
    let n = st.replications.unwrap_or(50);
    let instances = (0..n)
        .map(|i| presets::regression_instance(st.regression_machines, 100, derive_seed(cfg.seed, &[i as u64])))
        .collect::<drcc_cbm::Result<Vec<_>>>()?;
    let rows = harness::z2_comparison(&instances, 0.0, &st.sample_sizes, cfg.seed, solver.as_ref(), &solve_options(cfg))?;
    write_csv_rows(&cfg.out.join("z2_rows.csv"), &rows)?;
    #[derive(Serialize)]
    struct Rate {
        mode: &'static str,
        samples: usize,
        violation_rate: Option<f64>,
        mean_wall_s: f64,
    }
    let mut rates = Vec::new();
    let mut modes = vec![("exact", 0)];
    modes.extend(st.sample_sizes.iter().map(|&s| ("sample", s)));
    for (mode, s) in modes {
        let times: Vec<f64> = rows.iter().filter(|r| r.mode == mode && r.samples == s).map(|r| r.wall_s).collect();
        let rate = harness::violation_rate(&rows, mode, s);
        let mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
        println!("{mode:<6} S={s:<5} violation rate {:>6}  mean time {mean:.3}s", rate.map_or("-".into(), |r| format!("{r:.3}")));
        rates.push(Rate {
            mode,
            samples: s,
            violation_rate: rate,
            mean_wall_s: mean,
        });
    }
    write_csv_rows(&cfg.out.join("z2_summary.csv"), &rates)?;
    if rows.iter().any(|r| r.mode == "exact" && r.exact_violated == Some(true)) {
        return Err(fail(EXIT_VERIFICATION, "an exact-mode schedule breaks its own constraint".into()));
    }
    Ok(())
}

fn cmd_bench(cfg: &RunConfig) -> Result<(), Failure> {
    let b = &cfg.bench;
    let solver = backend(&cfg.solver.backend)?;
    let rows = harness::bench(
        &b.sizes,
        b.repeats,
        &presets::component_types(),
        b.delta,
        cfg.seed,
        solver.as_ref(),
        &solve_options(cfg),
    )?;
    write_csv_rows(&cfg.out.join("bench.csv"), &rows)?;
    for &k in &b.sizes {
        let r: Vec<_> = rows.iter().filter(|r| r.turbines == k).collect();
        let Some(first) = r.first() else { continue };
        let mean = r.iter().map(|r| r.wall_s).sum::<f64>() / r.len() as f64;
        let limits = r.iter().filter(|r| r.status != "Optimal").count();
        if limits > 0 {
            warn!("{k} turbines: {limits} solves stopped before optimality");
        }
        println!(
            "{k:>4} turbines {:>4} components: {} continuous, {} integer, {} binary, {} rows; mean {mean:.2}s",
            first.components, first.continuous, first.integer, first.binary, first.constraints
        );
    }
    Ok(())
}
