//! Rolling-horizon closed-loop simulation.
//!
//! Every `freeze` days the planner observes each component's signal up to the
//! clock, refreshes its RLD, solves the policy's model over a fresh horizon
//! and executes the first `freeze` epochs. Epoch `t` of a solve at clock `c`
//! is day `c + t`. Within a day the order of events is: regular orders placed,
//! arrivals, repairs (stock or expedite), holding cost on the closing stock.
//!
//! Costs are booked in integer micro-units so the category ledger sums to the
//! total exactly.

use std::time::Instant;

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{plan, BaselineKind};
use crate::degradation::{generate_dataset, simulate_signal, truncate_at_age, ComponentTypeParams, DegradationSignal};
use crate::milp::{backend, MilpSolver, SolveOptions};
use crate::model::{ProblemInstance, Z2Mode};
use crate::prognostics::{fit_priors, predict_rld, EmpiricalRld, Priors, DEFAULT_RLD_SAMPLES};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

const MICRO: f64 = 1e6;

fn micro(x: f64) -> i64 {
    (x * MICRO).round() as i64
}

/// Cumulative cost by category, in micro-units of currency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub maintenance: i64,
    pub downtime: i64,
    pub crew: i64,
    pub order_fixed: i64,
    pub holding: i64,
    pub ordering: i64,
    pub total: i64,
}

impl Ledger {
    fn book(&mut self, cat: CostCategory, amount: f64) {
        let m = micro(amount);
        match cat {
            CostCategory::Maintenance => self.maintenance += m,
            CostCategory::Downtime => self.downtime += m,
            CostCategory::Crew => self.crew += m,
            CostCategory::OrderFixed => self.order_fixed += m,
            CostCategory::Holding => self.holding += m,
            CostCategory::Ordering => self.ordering += m,
        }
        self.total += m;
    }

    pub fn category_sum(&self) -> i64 {
        self.maintenance + self.downtime + self.crew + self.order_fixed + self.holding + self.ordering
    }

    pub fn is_conserved(&self) -> bool {
        self.category_sum() == self.total
    }

    pub fn total_currency(&self) -> f64 {
        self.total as f64 / MICRO
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CostCategory {
    Maintenance,
    Downtime,
    Crew,
    OrderFixed,
    Holding,
    Ordering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Solve { day: i64, objective: f64, scheduled_in_freeze: usize },
    OrderPlaced { day: i64, spare_type: usize, qty: i64, arrival_day: i64 },
    Arrival { day: i64, spare_type: usize, qty: i64 },
    Failure { day: i64, component: usize },
    Repair { day: i64, component: usize, preventive: bool, expedited: bool, cost: f64 },
    Expedite { day: i64, spare_type: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub day: i64,
    pub component: usize,
    pub preventive: bool,
    pub expedited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub component: usize,
    pub failure_day: i64,
    /// `None` if still down when the episode ends.
    pub repair_day: Option<i64>,
}

impl FailureRecord {
    pub fn downtime(&self, sim_days: usize) -> i64 {
        self.repair_day.unwrap_or(sim_days as i64) - self.failure_day
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub start_day: i64,
    pub failures: usize,
    pub max_downtime: i64,
    pub z1_event: bool,
    pub z2_event: bool,
}

impl WindowStat {
    pub fn score(&self) -> f64 {
        0.5 * self.z1_event as u8 as f64 + 0.5 * self.z2_event as u8 as f64
    }
}

/// Splits days `1..=sim_days` into `floor(sim_days / t_max)` windows and flags
/// long downtimes (`> rho`) and failure counts above `gamma`. A failure is
/// attributed to the window containing its failure day.
pub fn window_stats(failures: &[FailureRecord], sim_days: usize, t_max: usize, rho: f64, gamma: usize) -> Vec<WindowStat> {
    let n = if t_max == 0 { 0 } else { sim_days / t_max };
    (0..n)
        .map(|w| {
            let lo = (w * t_max) as i64 + 1;
            let hi = ((w + 1) * t_max) as i64;
            let inside: Vec<&FailureRecord> = failures
                .iter()
                .filter(|f| f.failure_day >= lo && f.failure_day <= hi)
                .collect();
            let max_downtime = inside.iter().map(|f| f.downtime(sim_days)).max().unwrap_or(0);
            WindowStat {
                start_day: lo,
                failures: inside.len(),
                max_downtime,
                z1_event: inside.iter().any(|f| f.downtime(sim_days) as f64 > rho),
                z2_event: inside.len() > gamma,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeKpis {
    /// Share of preventive repairs in percent; `None` without repairs.
    pub pct_pm: Option<f64>,
    pub cost_per_day: f64,
    /// Mean window score; `None` if the episode is shorter than one window.
    pub avg_cc_violation: Option<f64>,
    pub preventive: usize,
    pub corrective: usize,
    pub expedited: usize,
    pub windows: Vec<WindowStat>,
}

pub fn episode_kpis(
    repairs: &[RepairRecord],
    failures: &[FailureRecord],
    ledger: &Ledger,
    sim_days: usize,
    t_max: usize,
    rho: f64,
    gamma: usize,
) -> EpisodeKpis {
    let preventive = repairs.iter().filter(|r| r.preventive).count();
    let corrective = repairs.len() - preventive;
    let windows = window_stats(failures, sim_days, t_max, rho, gamma);
    let avg = (!windows.is_empty()).then(|| windows.iter().map(WindowStat::score).sum::<f64>() / windows.len() as f64);
    EpisodeKpis {
        pct_pm: (!repairs.is_empty()).then(|| 100.0 * preventive as f64 / repairs.len() as f64),
        cost_per_day: ledger.total_currency() / sim_days.max(1) as f64,
        avg_cc_violation: avg,
        preventive,
        corrective,
        expedited: repairs.iter().filter(|r| r.expedited).count(),
        windows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    /// Costs, topology and risk parameters; stock and pipeline are the
    /// starting state and are overwritten at each re-solve.
    pub template: ProblemInstance,
    /// Ground-truth degradation model per spare type.
    pub types: Vec<ComponentTypeParams>,
    pub policy: BaselineKind,
    pub z2: Z2Mode,
    pub sim_days: usize,
    pub rld_samples: usize,
    /// Initial age as a fraction of each first signal's lifetime.
    pub initial_life_fraction: (f64, f64),
    pub solve: SolveOptions,
    pub solver: String,
}

impl EpisodeConfig {
    pub fn new(template: ProblemInstance, types: Vec<ComponentTypeParams>, policy: BaselineKind, sim_days: usize) -> Self {
        EpisodeConfig {
            template,
            types,
            policy,
            z2: Z2Mode::Exact,
            sim_days,
            rld_samples: DEFAULT_RLD_SAMPLES,
            initial_life_fraction: (0.0, 0.8),
            solve: SolveOptions::default(),
            solver: "highs".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.template.validate()?;
        if self.types.len() != self.template.spare_types.len() {
            return Err(Error::Dimension(format!(
                "{} degradation models for {} spare types",
                self.types.len(),
                self.template.spare_types.len()
            )));
        }
        let (lo, hi) = self.initial_life_fraction;
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidParameter(format!("initial life fraction ({lo}, {hi}) must lie in [0, 1)")));
        }
        if self.sim_days == 0 || self.rld_samples == 0 {
            return Err(Error::InvalidParameter("sim_days and rld_samples must be positive".into()));
        }
        if self.sim_days % self.template.freeze != 0 {
            warn!(
                "sim_days {} is not a multiple of the freeze length {}",
                self.sim_days, self.template.freeze
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub seed: u64,
    pub policy: BaselineKind,
    pub sim_days: usize,
    pub solves: usize,
    pub ledger: Ledger,
    pub repairs: Vec<RepairRecord>,
    pub failures: Vec<FailureRecord>,
    pub events: Vec<Event>,
    /// Lowest closing stock over all days and spare types.
    pub min_on_hand: i64,
    /// Every repair consumed exactly one unit from stock or an expedite.
    pub stock_matched: bool,
    pub final_on_hand: Vec<i64>,
    pub kpis: EpisodeKpis,
}

impl Episode {
    /// Ledger conservation, non-negative stock and matched stock movements.
    pub fn integrity_ok(&self) -> bool {
        self.ledger.is_conserved() && self.min_on_hand >= 0 && self.stock_matched
    }
}

struct Unit {
    signal: DegradationSignal,
    install_day: i64,
    generation: u64,
}

impl Unit {
    fn failure_day(&self) -> i64 {
        self.install_day + self.signal.failure_time.ceil() as i64
    }
}

const SEED_SIGNAL: u64 = 1;
const SEED_AGE: u64 = 2;
const SEED_RLD: u64 = 3;
const SEED_SCENARIO: u64 = 4;

fn new_unit(types: &[ComponentTypeParams], l: usize, seed: u64, j: usize, generation: u64, day: i64) -> Result<Unit> {
    let signal = simulate_signal(&types[l], derive_seed(seed, &[SEED_SIGNAL, j as u64, generation]))?;
    Ok(Unit {
        signal,
        install_day: day,
        generation,
    })
}

/// Current RLD for every component at clock `clock`.
fn refresh_rlds(units: &[Unit], inst: &ProblemInstance, priors: &[Priors], clock: i64, n: usize, seed: u64, cycle: u64) -> Result<Vec<EmpiricalRld>> {
    units
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let l = inst.components[j].spare_type;
            let pr = &priors[l];
            if u.failure_day() <= clock {
                return Ok(EmpiricalRld::failed(n, pr.tau_max));
            }
            let obs = truncate_at_age(&u.signal, (clock - u.install_day) as f64)?;
            predict_rld(pr, &obs, n, derive_seed(seed, &[SEED_RLD, cycle, j as u64, u.generation]))
        })
        .collect()
}

/// Runs one closed-loop episode. `priors` are indexed by spare type.
pub fn run_episode(cfg: &EpisodeConfig, priors: &[Priors], seed: u64) -> Result<Episode> {
    cfg.validate()?;
    let solver = backend(&cfg.solver)?;
    run_episode_with(cfg, priors, seed, solver.as_ref())
}

pub fn run_episode_with(cfg: &EpisodeConfig, priors: &[Priors], seed: u64, solver: &dyn MilpSolver) -> Result<Episode> {
    cfg.validate()?;
    let tmpl = &cfg.template;
    if priors.len() != tmpl.spare_types.len() {
        return Err(Error::Dimension(format!(
            "{} priors for {} spare types",
            priors.len(),
            tmpl.spare_types.len()
        )));
    }
    let nj = tmpl.n_components();
    let nl = tmpl.spare_types.len();
    let days = cfg.sim_days as i64;
    let freeze = tmpl.freeze as i64;
    let lead = tmpl.lead_time as i64;

    let mut units = Vec::with_capacity(nj);
    for j in 0..nj {
        let l = tmpl.components[j].spare_type;
        let mut u = new_unit(&cfg.types, l, seed, j, 0, 0)?;
        let (lo, hi) = cfg.initial_life_fraction;
        let frac = if hi > lo { stream(seed, &[SEED_AGE, j as u64]).random_range(lo..hi) } else { lo };
        u.install_day = -((frac * u.signal.failure_time).floor() as i64);
        units.push(u);
    }
    let mut on_hand: Vec<i64> = tmpl.spare_types.iter().map(|s| s.initial_stock as i64).collect();
    // (arrival_day, spare type, qty)
    let mut pipeline: Vec<(i64, usize, i64)> = Vec::new();
    for (l, s) in tmpl.spare_types.iter().enumerate() {
        for (i, &q) in s.in_flight.iter().enumerate() {
            if q > 0 {
                pipeline.push((i as i64 + 1, l, q as i64));
            }
        }
    }

    let mut ledger = Ledger::default();
    let mut events = Vec::new();
    let mut repairs = Vec::new();
    let mut failures = Vec::new();
    let mut min_on_hand = on_hand.iter().copied().min().unwrap_or(0);
    let mut stock_matched = true;
    let mut solves = 0usize;

    let mut clock = 0i64;
    let mut cycle = 0u64;
    while clock < days {
        let mut inst = tmpl.clone();
        for l in 0..nl {
            inst.spare_types[l].initial_stock = on_hand[l] as u32;
            inst.spare_types[l].in_flight = (1..=tmpl.lead_time as i64)
                .map(|i| {
                    pipeline
                        .iter()
                        .filter(|&&(d, ll, _)| ll == l && d == clock + i)
                        .map(|p| p.2)
                        .sum::<i64>() as u32
                })
                .collect();
        }
        let rlds = refresh_rlds(&units, &inst, priors, clock, cfg.rld_samples, seed, cycle)?;
        let z2 = match cfg.z2 {
            Z2Mode::SampleBased { samples, seed: s } => Z2Mode::SampleBased {
                samples,
                seed: derive_seed(s, &[SEED_SCENARIO, seed, cycle]),
            },
            other => other,
        };
        let p = plan(cfg.policy, &inst, &rlds, z2, solver, &cfg.solve)
            .map_err(|e| Error::Infeasible(format!("episode seed {seed}, day {clock}: {e}")))?;
        solves += 1;
        let epochs: Vec<usize> = p.repair_epochs().iter().map(|e| e.unwrap_or(usize::MAX)).collect();
        events.push(Event::Solve {
            day: clock,
            objective: p.objective(),
            scheduled_in_freeze: epochs.iter().filter(|&&t| t as i64 <= freeze).count(),
        });
        let orders = p.regular_orders().to_vec();

        let last = (clock + freeze).min(days);
        for d in clock + 1..=last {
            let t = (d - clock) as usize;
            let mut fixed_paid = false;
            for (l, row) in orders.iter().enumerate() {
                let q = row[t - 1];
                if q > 0 {
                    let s = &tmpl.spare_types[l];
                    ledger.book(CostCategory::Ordering, s.c_reg * q as f64);
                    if !fixed_paid {
                        ledger.book(CostCategory::OrderFixed, tmpl.b_reg);
                        fixed_paid = true;
                    }
                    pipeline.push((d + lead, l, q));
                    events.push(Event::OrderPlaced {
                        day: d,
                        spare_type: l,
                        qty: q,
                        arrival_day: d + lead,
                    });
                }
            }
            let mut k = 0;
            while k < pipeline.len() {
                if pipeline[k].0 == d {
                    let (_, l, q) = pipeline.remove(k);
                    on_hand[l] += q;
                    events.push(Event::Arrival { day: d, spare_type: l, qty: q });
                } else {
                    k += 1;
                }
            }
            for (j, u) in units.iter().enumerate() {
                if u.failure_day() == d {
                    events.push(Event::Failure { day: d, component: j });
                }
            }
            let mut machines_down = vec![false; tmpl.machines.len()];
            let mut crew_out = false;
            for j in 0..nj {
                if epochs[j] != t {
                    continue;
                }
                let spec = &tmpl.components[j];
                let l = spec.spare_type;
                let before = on_hand[l];
                let expedited = on_hand[l] == 0;
                if expedited {
                    ledger.book(CostCategory::Ordering, tmpl.spare_types[l].c_exp);
                    events.push(Event::Expedite { day: d, spare_type: l });
                } else {
                    on_hand[l] -= 1;
                }
                if !(expedited && on_hand[l] == before || !expedited && on_hand[l] == before - 1) {
                    stock_matched = false;
                }
                let fd = units[j].failure_day();
                let preventive = fd > d;
                let c = spec.costs;
                let cost = if preventive {
                    c.c_pr + c.v_pr * (fd - d) as f64
                } else {
                    c.c_co + c.v_co * (d - fd) as f64
                };
                ledger.book(CostCategory::Maintenance, cost);
                machines_down[spec.machine] = true;
                crew_out = true;
                if !preventive {
                    failures.push(FailureRecord {
                        component: j,
                        failure_day: fd,
                        repair_day: Some(d),
                    });
                }
                repairs.push(RepairRecord {
                    day: d,
                    component: j,
                    preventive,
                    expedited,
                });
                events.push(Event::Repair {
                    day: d,
                    component: j,
                    preventive,
                    expedited,
                    cost,
                });
                let generation = units[j].generation + 1;
                units[j] = new_unit(&cfg.types, l, seed, j, generation, d)?;
            }
            for (k, down) in machines_down.iter().enumerate() {
                if *down {
                    ledger.book(CostCategory::Downtime, tmpl.machines[k].c_down);
                }
            }
            if crew_out {
                ledger.book(CostCategory::Crew, tmpl.c_crew);
            }
            for l in 0..nl {
                ledger.book(CostCategory::Holding, tmpl.spare_types[l].c_hold * on_hand[l] as f64);
                min_on_hand = min_on_hand.min(on_hand[l]);
            }
        }
        clock = last;
        cycle += 1;
    }
    for (j, u) in units.iter().enumerate() {
        if u.failure_day() <= days {
            failures.push(FailureRecord {
                component: j,
                failure_day: u.failure_day(),
                repair_day: None,
            });
        }
    }
    failures.sort_by_key(|f| (f.failure_day, f.component));
    let kpis = episode_kpis(&repairs, &failures, &ledger, cfg.sim_days, tmpl.t_max, tmpl.rho, tmpl.gamma);
    Ok(Episode {
        seed,
        policy: cfg.policy,
        sim_days: cfg.sim_days,
        solves,
        ledger,
        repairs,
        failures,
        events,
        min_on_hand,
        stock_matched,
        final_on_hand: on_hand,
        kpis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
}

impl Stat {
    pub fn from_values(xs: &[f64]) -> Option<Stat> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            n,
            mean,
            std_err: se,
            ci95: (mean - 1.96 * se, mean + 1.96 * se),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub pct_pm: Option<Stat>,
    pub cost_per_day: Stat,
    pub avg_cc_violation: Option<Stat>,
    pub per_replication: Vec<EpisodeKpis>,
}

pub fn compute_kpis(episodes: &[Episode]) -> Result<KpiReport> {
    if episodes.is_empty() {
        return Err(Error::InvalidParameter("no episodes to summarise".into()));
    }
    let per: Vec<EpisodeKpis> = episodes.iter().map(|e| e.kpis.clone()).collect();
    let pm: Vec<f64> = per.iter().filter_map(|k| k.pct_pm).collect();
    let cost: Vec<f64> = per.iter().map(|k| k.cost_per_day).collect();
    let viol: Vec<f64> = per.iter().filter_map(|k| k.avg_cc_violation).collect();
    Ok(KpiReport {
        pct_pm: Stat::from_values(&pm),
        cost_per_day: Stat::from_values(&cost).expect("at least one episode"),
        avg_cc_violation: Stat::from_values(&viol),
        per_replication: per,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub label: String,
    pub policy: BaselineKind,
    pub training_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub name: String,
    pub cells: Vec<StudyCell>,
    pub replications: usize,
    pub base_seed: u64,
    pub sim_days: usize,
    pub types: Vec<ComponentTypeParams>,
    pub template: ProblemInstance,
    pub z2: Z2Mode,
    pub rld_samples: usize,
    pub initial_life_fraction: (f64, f64),
    pub solve: SolveOptions,
    pub solver: String,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub cell: String,
    pub policy: String,
    pub training_size: usize,
    pub replication: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub pct_pm: Option<f64>,
    pub cost_per_day: Option<f64>,
    pub avg_cc_violation: Option<f64>,
    pub preventive: Option<usize>,
    pub corrective: Option<usize>,
    pub expedited: Option<usize>,
    pub solves: Option<usize>,
    pub integrity_ok: Option<bool>,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub completed: usize,
    pub failed: usize,
    pub report: Option<KpiReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub name: String,
    pub rows: Vec<ReplicationRow>,
    pub cells: Vec<CellSummary>,
    /// Episodes grouped by cell, in replication order.
    pub episodes: Vec<Vec<Episode>>,
}

impl StudyResult {
    pub fn cell(&self, label: &str) -> Option<(&CellSummary, &[Episode])> {
        let i = self.cells.iter().position(|c| c.cell == label)?;
        Some((&self.cells[i], &self.episodes[i]))
    }
}

/// Seed of replication `r`; shared by every cell so policies face the same
/// world (common random numbers).
pub fn replication_seed(base: u64, r: usize) -> u64 {
    derive_seed(base, &[r as u64])
}

/// Priors fitted from freshly simulated training data, one per spare type.
pub fn training_priors(types: &[ComponentTypeParams], n: usize, seed: u64) -> Result<Vec<Priors>> {
    types
        .iter()
        .enumerate()
        .map(|(l, t)| fit_priors(&generate_dataset(t, n, derive_seed(seed, &[0x7a, n as u64, l as u64]))?))
        .collect()
}

/// Runs every cell for every replication. Failures are recorded per row and
/// the study continues.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    backend(&cfg.solver)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.cells.len())
        .flat_map(|c| (0..cfg.replications).map(move |r| (c, r)))
        .collect();
    let run = |&(c, r): &(usize, usize)| -> (ReplicationRow, Option<Episode>) {
        let cell = &cfg.cells[c];
        let seed = replication_seed(cfg.base_seed, r);
        let start = Instant::now();
        let ep_cfg = EpisodeConfig {
            template: cfg.template.clone(),
            types: cfg.types.clone(),
            policy: cell.policy,
            z2: cfg.z2,
            sim_days: cfg.sim_days,
            rld_samples: cfg.rld_samples,
            initial_life_fraction: cfg.initial_life_fraction,
            solve: cfg.solve,
            solver: cfg.solver.clone(),
        };
        let res = training_priors(&cfg.types, cell.training_size, seed).and_then(|p| run_episode(&ep_cfg, &p, seed));
        let wall_s = start.elapsed().as_secs_f64();
        let mut row = ReplicationRow {
            cell: cell.label.clone(),
            policy: cell.policy.to_string(),
            training_size: cell.training_size,
            replication: r,
            seed,
            error: None,
            pct_pm: None,
            cost_per_day: None,
            avg_cc_violation: None,
            preventive: None,
            corrective: None,
            expedited: None,
            solves: None,
            integrity_ok: None,
            wall_s,
        };
        match res {
            Ok(ep) => {
                row.pct_pm = ep.kpis.pct_pm;
                row.cost_per_day = Some(ep.kpis.cost_per_day);
                row.avg_cc_violation = ep.kpis.avg_cc_violation;
                row.preventive = Some(ep.kpis.preventive);
                row.corrective = Some(ep.kpis.corrective);
                row.expedited = Some(ep.kpis.expedited);
                row.solves = Some(ep.solves);
                row.integrity_ok = Some(ep.integrity_ok());
                info!("{} rep {r}: {:.3}/day in {wall_s:.1}s", cell.label, ep.kpis.cost_per_day);
                (row, Some(ep))
            }
            Err(e) => {
                warn!("{} rep {r} failed: {e}", cell.label);
                row.error = Some(e.to_string());
                (row, None)
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let out: Vec<(ReplicationRow, Option<Episode>)> = pool.install(|| jobs.par_iter().map(run).collect());

    let mut rows = Vec::with_capacity(out.len());
    let mut episodes: Vec<Vec<Episode>> = vec![Vec::new(); cfg.cells.len()];
    let mut failed = vec![0usize; cfg.cells.len()];
    for ((c, _), (row, ep)) in jobs.iter().zip(out) {
        match ep {
            Some(e) => episodes[*c].push(e),
            None => failed[*c] += 1,
        }
        rows.push(row);
    }
    let cells = cfg
        .cells
        .iter()
        .enumerate()
        .map(|(c, cell)| CellSummary {
            cell: cell.label.clone(),
            completed: episodes[c].len(),
            failed: failed[c],
            report: compute_kpis(&episodes[c]).ok(),
        })
        .collect();
    Ok(StudyResult {
        name: cfg.name.clone(),
        rows,
        cells,
        episodes,
    })
}

/// A fleet frozen at random ages: the instance (stock and pipeline from the
/// template) and one RLD per component, drawn from priors fitted on
/// `training` signals per type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub instance: ProblemInstance,
    pub rlds: Vec<EmpiricalRld>,
    /// Hidden remaining lives.
    pub true_residuals: Vec<f64>,
}

pub fn snapshot(
    template: &ProblemInstance,
    types: &[ComponentTypeParams],
    training: usize,
    rld_samples: usize,
    life_fraction: (f64, f64),
    seed: u64,
) -> Result<Snapshot> {
    template.validate()?;
    let priors = training_priors(types, training, seed)?;
    let mut rlds = Vec::with_capacity(template.n_components());
    let mut residuals = Vec::with_capacity(template.n_components());
    for (j, c) in template.components.iter().enumerate() {
        let l = c.spare_type;
        let sig = simulate_signal(&types[l], derive_seed(seed, &[0x5a, j as u64]))?;
        let frac = stream(seed, &[0x5b, j as u64]).random_range(life_fraction.0..=life_fraction.1);
        let obs = truncate_at_age(&sig, (frac * sig.failure_time).floor())?;
        residuals.push(obs.true_residual);
        rlds.push(predict_rld(&priors[l], &obs, rld_samples, derive_seed(seed, &[0x5c, j as u64]))?);
    }
    Ok(Snapshot {
        instance: template.clone(),
        rlds,
        true_residuals: residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Z2Row {
    pub instance: usize,
    /// `"exact"` or `"sample"`.
    pub mode: String,
    /// Scenario count; 0 in exact mode.
    pub samples: usize,
    pub status: String,
    pub objective: Option<f64>,
    pub wall_s: f64,
    /// Exact probability of at most `gamma` unexpected failures under the
    /// chosen schedule.
    pub z2_probability: Option<f64>,
    /// The schedule breaks the exact constraint.
    pub exact_violated: Option<bool>,
    pub verification_passed: bool,
}

/// Solves each instance with the exact encoding and with the sample-based one
/// at every size in `sample_sizes`, checking each schedule against the exact
/// recursion. Scenario seeds are `derive_seed(seed, [instance, S])`.
pub fn z2_comparison(
    instances: &[(ProblemInstance, Vec<EmpiricalRld>)],
    delta: f64,
    sample_sizes: &[usize],
    seed: u64,
    solver: &dyn MilpSolver,
    opts: &SolveOptions,
) -> Result<Vec<Z2Row>> {
    let mut rows = Vec::new();
    for (i, (inst, rlds)) in instances.iter().enumerate() {
        let params = crate::baselines::drcc_params(inst, rlds, delta)?;
        let modes = std::iter::once(Z2Mode::Exact).chain(sample_sizes.iter().map(|&s| Z2Mode::SampleBased {
            samples: s,
            seed: derive_seed(seed, &[i as u64, s as u64]),
        }));
        for z2 in modes {
            let built = crate::model::build_milp(inst, &params, z2, &crate::model::Variant::Joint)?;
            let sol = crate::model::solve(&built, solver, opts)?;
            let rep = crate::model::verify_solution(inst, &params, &sol);
            let (mode, samples) = match z2 {
                Z2Mode::SampleBased { samples, .. } => ("sample", samples),
                _ => ("exact", 0),
            };
            rows.push(Z2Row {
                instance: i,
                mode: mode.into(),
                samples,
                status: format!("{:?}", sol.status),
                objective: sol.objective,
                wall_s: sol.wall_time_s,
                z2_probability: rep.z2_probability,
                exact_violated: rep.z2_probability.map(|p| p < 1.0 - inst.beta - crate::dro::PROB_TOL),
                verification_passed: rep.passed(),
            });
        }
    }
    Ok(rows)
}

/// Share of solved rows in `rows` with the given mode and size whose schedule
/// breaks the exact constraint.
pub fn violation_rate(rows: &[Z2Row], mode: &str, samples: usize) -> Option<f64> {
    let v: Vec<bool> = rows
        .iter()
        .filter(|r| r.mode == mode && r.samples == samples)
        .filter_map(|r| r.exact_violated)
        .collect();
    (!v.is_empty()).then(|| v.iter().filter(|&&b| b).count() as f64 / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub turbines: usize,
    pub components: usize,
    pub repeat: usize,
    pub continuous: usize,
    pub integer: usize,
    pub binary: usize,
    pub constraints: usize,
    pub status: String,
    pub wall_s: f64,
    pub mip_gap: Option<f64>,
}

/// Builds and solves exact-mode wind-farm snapshots at each size.
pub fn bench(
    sizes: &[usize],
    repeats: usize,
    types: &[ComponentTypeParams],
    delta: f64,
    seed: u64,
    solver: &dyn MilpSolver,
    opts: &SolveOptions,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &k in sizes {
        let template = crate::presets::wind_farm(k);
        for r in 0..repeats {
            let snap = snapshot(&template, types, 50, DEFAULT_RLD_SAMPLES, (0.3, 0.95), derive_seed(seed, &[k as u64, r as u64]))?;
            let params = crate::baselines::drcc_params(&snap.instance, &snap.rlds, delta)?;
            let built = crate::model::build_milp(&snap.instance, &params, Z2Mode::Exact, &crate::model::Variant::Joint)?;
            let size = built.size();
            let sol = crate::model::solve(&built, solver, opts)?;
            info!("bench {k} turbines rep {r}: {:?} in {:.2}s", sol.status, sol.wall_time_s);
            rows.push(BenchRow {
                turbines: k,
                components: snap.instance.n_components(),
                repeat: r,
                continuous: size.continuous,
                integer: size.integer,
                binary: size.binary,
                constraints: size.constraints,
                status: format!("{:?}", sol.status),
                wall_s: sol.wall_time_s,
                mip_gap: sol.mip_gap,
            });
        }
    }
    Ok(rows)
}
