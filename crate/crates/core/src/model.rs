//! Problem instance, MILP construction, solution extraction and independent
//! verification of the joint maintenance and spare-parts model.
//!
//! Epochs are 1-based in the math and stored 0-based (`t - 1`) in vectors.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dro::{check_z2_probability, MaintenanceCosts, PrecomputedParams};
use crate::milp::{LinExpr, Milp, MilpSolver, ModelSize, SolveOptions, SolveStatus, VarId, VarKind};
use crate::rng;
use crate::{Error, Result};

/// Tolerance for arithmetic checks in [`verify_solution`].
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub machine: usize,
    pub spare_type: usize,
    pub costs: MaintenanceCosts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub c_down: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpareTypeSpec {
    pub c_hold: f64,
    pub c_reg: f64,
    pub c_exp: f64,
    pub initial_stock: u32,
    /// Regular orders already placed; entry `i` arrives at epoch `i + 1`.
    #[serde(default)]
    pub in_flight: Vec<u32>,
}

impl SpareTypeSpec {
    pub fn arrival(&self, t: usize) -> u32 {
        self.in_flight.get(t - 1).copied().unwrap_or(0)
    }
}

/// Supplier capacity `G_t`, either constant or per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SupplierCapacity {
    Constant(f64),
    PerEpoch(Vec<f64>),
}

impl SupplierCapacity {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            SupplierCapacity::Constant(g) => *g,
            SupplierCapacity::PerEpoch(v) => v[t - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub components: Vec<ComponentSpec>,
    pub machines: Vec<MachineSpec>,
    pub spare_types: Vec<SpareTypeSpec>,
    pub t_max: usize,
    /// Freeze length `Delta^upd`.
    pub freeze: usize,
    /// Regular-order lead time `Delta^reg`.
    pub lead_time: usize,
    /// Crew capacity `M`; defaults to the number of components.
    #[serde(default)]
    pub crew_capacity: Option<usize>,
    pub supplier_capacity: SupplierCapacity,
    pub c_crew: f64,
    pub b_reg: f64,
    pub rho: f64,
    pub gamma: usize,
    pub eps: f64,
    pub beta: f64,
}

impl ProblemInstance {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn crew_capacity(&self) -> usize {
        self.crew_capacity.unwrap_or(self.components.len())
    }

    pub fn machine_members(&self, k: usize) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&j| self.components[j].machine == k)
            .collect()
    }

    pub fn spare_members(&self, l: usize) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&j| self.components[j].spare_type == l)
            .collect()
    }

    pub fn component_costs(&self) -> Vec<MaintenanceCosts> {
        self.components.iter().map(|c| c.costs).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.components.is_empty() {
            return bad("instance has no components".into());
        }
        if self.t_max == 0 || self.freeze == 0 || self.freeze > self.t_max {
            return bad(format!("need 1 <= freeze ({}) <= t_max ({})", self.freeze, self.t_max));
        }
        if !(self.eps > 0.0 && self.eps < 1.0 && self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("eps and beta must lie in (0, 1), got {} and {}", self.eps, self.beta));
        }
        if !(self.rho >= 0.0) {
            return bad(format!("rho must be >= 0, got {}", self.rho));
        }
        for (j, c) in self.components.iter().enumerate() {
            if c.machine >= self.machines.len() || c.spare_type >= self.spare_types.len() {
                return bad(format!("component {j} references a missing machine or spare type"));
            }
            c.costs.validate()?;
        }
        let nonneg = self
            .machines
            .iter()
            .map(|m| m.c_down)
            .chain(self.spare_types.iter().flat_map(|s| [s.c_hold, s.c_reg, s.c_exp]))
            .chain([self.c_crew, self.b_reg]);
        if nonneg.into_iter().any(|c| !(c >= 0.0)) {
            return bad("all costs must be non-negative".into());
        }
        for (l, s) in self.spare_types.iter().enumerate() {
            if s.in_flight.len() > self.lead_time {
                return bad(format!(
                    "spare type {l}: {} in-flight entries exceed the lead time {}",
                    s.in_flight.len(),
                    self.lead_time
                ));
            }
        }
        match &self.supplier_capacity {
            SupplierCapacity::Constant(g) if !(*g >= 0.0) => return bad("negative supplier capacity".into()),
            SupplierCapacity::PerEpoch(v) if v.len() != self.t_max || v.iter().any(|g| !(*g >= 0.0)) => {
                return bad(format!("supplier capacity needs {} non-negative entries", self.t_max))
            }
            _ => {}
        }
        for k in 0..self.machines.len() {
            if self.machine_members(k).is_empty() {
                warn!("machine {k} has no components");
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }
}

/// How the failure-count chance constraint is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Z2Mode {
    /// Exact linearisation of the Poisson-binomial recursion.
    Exact,
    /// Scenario counting over `samples` Bernoulli draws.
    SampleBased { samples: usize, seed: u64 },
    Off,
}

/// Which decision blocks the model contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Variant {
    Joint,
    /// No spare-part variables or inventory constraints.
    MaintenanceOnly,
    /// Repairs fixed at the given 1-based epochs; inventory decisions only.
    InventoryOnly { repair_epochs: Vec<usize> },
}

#[derive(Debug, Clone, Default)]
struct Layout {
    x: Vec<Vec<Option<VarId>>>,
    y: Vec<Vec<VarId>>,
    z: Vec<VarId>,
    r: Vec<VarId>,
    h: Vec<Vec<VarId>>,
    g_reg: Vec<Vec<VarId>>,
    g_exp: Vec<Vec<VarId>>,
    /// `a[j][e]`, `None` where the value is the constant 1.
    a: Vec<Vec<Option<VarId>>>,
    b: Vec<Vec<Option<VarId>>>,
    c: Vec<Vec<Vec<Option<VarId>>>>,
    scenarios: Vec<VarId>,
}

/// A MILP together with the mapping back to model variables.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub milp: Milp,
    pub z2: Z2Mode,
    pub variant: Variant,
    layout: Layout,
    n_components: usize,
    t_max: usize,
}

impl BuiltModel {
    pub fn size(&self) -> ModelSize {
        self.milp.size()
    }
}

fn a_expr(a: &[Vec<Option<VarId>>], j: usize, e: usize) -> LinExpr {
    match a[j][e] {
        Some(v) => LinExpr::var(v),
        None => LinExpr::constant(1.0),
    }
}

/// Builds the MILP for `instance` with precomputed DRO parameters.
pub fn build_milp(
    instance: &ProblemInstance,
    params: &PrecomputedParams,
    z2: Z2Mode,
    variant: &Variant,
) -> Result<BuiltModel> {
    instance.validate()?;
    let nj = instance.n_components();
    let nk = instance.machines.len();
    let nl = instance.spare_types.len();
    let tm = instance.t_max;
    params.check_dims(nj, tm)?;
    if let Z2Mode::SampleBased { samples: 0, .. } = z2 {
        return Err(Error::InvalidParameter("sample-based Z2 needs at least one sample".into()));
    }
    let mut m = Milp::new();
    let mut lay = Layout::default();
    let inf = f64::INFINITY;
    let ninf = f64::NEG_INFINITY;
    let with_maint = !matches!(variant, Variant::InventoryOnly { .. });
    let with_inv = !matches!(variant, Variant::MaintenanceOnly);
    let big_j = nj as f64;

    if with_maint {
        for j in 0..nj {
            let row: Vec<Option<VarId>> = (1..=tm)
                .map(|t| {
                    params
                        .u(j, t)
                        .then(|| m.add_var(format!("x_{j}_{t}"), VarKind::Binary, 0.0, 1.0, params.psi[j][t - 1]))
                })
                .collect();
            if row.iter().all(Option::is_none) {
                return Err(Error::NoFeasibleRepairEpoch { component: j });
            }
            lay.x.push(row);
        }
        for (k, mach) in instance.machines.iter().enumerate() {
            lay.y.push(
                (1..=tm)
                    .map(|t| m.add_var(format!("y_{k}_{t}"), VarKind::Binary, 0.0, 1.0, mach.c_down))
                    .collect(),
            );
        }
        lay.z = (1..=tm)
            .map(|t| m.add_var(format!("z_{t}"), VarKind::Binary, 0.0, 1.0, instance.c_crew))
            .collect();

        for j in 0..nj {
            let coeffs = lay.x[j].iter().flatten().map(|&v| (v, 1.0)).collect();
            m.add_row(format!("one_repair_{j}"), coeffs, 1.0, 1.0);
        }
        let cap = instance.crew_capacity() as f64;
        for t in 1..=tm {
            let mut coeffs: Vec<_> = (0..nj).filter_map(|j| lay.x[j][t - 1]).map(|v| (v, 1.0)).collect();
            coeffs.push((lay.z[t - 1], -cap));
            m.add_row(format!("crew_{t}"), coeffs, ninf, 0.0);
        }
        for k in 0..nk {
            let members = instance.machine_members(k);
            if members.is_empty() {
                continue;
            }
            for t in 1..=tm {
                let mut coeffs: Vec<_> = members.iter().filter_map(|&j| lay.x[j][t - 1]).map(|v| (v, 1.0)).collect();
                if coeffs.is_empty() {
                    continue;
                }
                coeffs.push((lay.y[k][t - 1], -(members.len() as f64)));
                m.add_row(format!("shutdown_{k}_{t}"), coeffs, ninf, 0.0);
            }
        }
    }

    if with_inv {
        lay.r = (1..=tm)
            .map(|t| m.add_var(format!("r_{t}"), VarKind::Binary, 0.0, 1.0, instance.b_reg))
            .collect();
        for (l, s) in instance.spare_types.iter().enumerate() {
            let h_ub = big_j + s.initial_stock as f64 + s.in_flight.iter().map(|&q| q as f64).sum::<f64>();
            lay.h.push(
                (1..=tm)
                    .map(|t| m.add_var(format!("h_{l}_{t}"), VarKind::Integer, 0.0, h_ub, s.c_hold))
                    .collect(),
            );
            lay.g_reg.push(
                (1..=tm)
                    .map(|t| m.add_var(format!("greg_{l}_{t}"), VarKind::Integer, 0.0, big_j, s.c_reg))
                    .collect(),
            );
            lay.g_exp.push(
                (1..=tm)
                    .map(|t| m.add_var(format!("gexp_{l}_{t}"), VarKind::Integer, 0.0, big_j, s.c_exp))
                    .collect(),
            );
        }
        for t in 1..=tm {
            let mut coeffs: Vec<_> = (0..nl).map(|l| (lay.g_reg[l][t - 1], 1.0)).collect();
            coeffs.push((lay.r[t - 1], -instance.supplier_capacity.at(t)));
            m.add_row(format!("supplier_{t}"), coeffs, ninf, 0.0);
        }
        let fixed = match variant {
            Variant::InventoryOnly { repair_epochs } => {
                if repair_epochs.len() != nj || repair_epochs.iter().any(|&t| t == 0 || t > tm) {
                    return Err(Error::Dimension(format!(
                        "inventory-only model needs {nj} repair epochs in 1..={tm}"
                    )));
                }
                Some(repair_epochs)
            }
            _ => None,
        };
        let lt = instance.lead_time;
        for (l, s) in instance.spare_types.iter().enumerate() {
            let members = instance.spare_members(l);
            for t in 1..=tm {
                // h_t - h_{t-1} - gexp_t - arrivals_t + repairs_t = 0
                let mut e = LinExpr::var(lay.h[l][t - 1]).add_term(lay.g_exp[l][t - 1], -1.0);
                e = if t == 1 {
                    e.add_constant(-(s.initial_stock as f64))
                } else {
                    e.add_term(lay.h[l][t - 2], -1.0)
                };
                if t <= lt {
                    e = e.add_constant(-(s.arrival(t) as f64));
                } else {
                    e = e.add_term(lay.g_reg[l][t - lt - 1], -1.0);
                }
                for &j in &members {
                    match fixed {
                        Some(ep) => {
                            if ep[j] == t {
                                e = e.add_constant(1.0);
                            }
                        }
                        None => {
                            if let Some(v) = lay.x[j][t - 1] {
                                e = e.add_term(v, 1.0);
                            }
                        }
                    }
                }
                m.add_expr_row(format!("balance_{l}_{t}"), e, 0.0, 0.0);
            }
        }
    }

    let gamma = instance.gamma;
    if with_maint && gamma < nj {
        match z2 {
            Z2Mode::Exact => {
                lay.a = (0..=nj)
                    .map(|j| {
                        (0..=gamma)
                            .map(|e| (j > e).then(|| m.add_var(format!("a_{j}_{e}"), VarKind::Continuous, 0.0, 1.0, 0.0)))
                            .collect()
                    })
                    .collect();
                lay.b = vec![vec![None; tm]; nj];
                lay.c = vec![vec![vec![None; tm]; gamma]; nj];
                for j in 1..=nj {
                    // layer e = 0
                    let prev = a_expr(&lay.a, j - 1, 0);
                    let mut def = a_expr(&lay.a, j, 0).add(&prev, -1.0);
                    for t in 1..=tm {
                        let (Some(x), p) = (lay.x[j - 1][t - 1], params.p_bar[j - 1][t - 1]) else {
                            continue;
                        };
                        if p <= 0.0 {
                            continue;
                        }
                        let b = m.add_var(format!("b_{j}_{t}"), VarKind::Continuous, 0.0, p, 0.0);
                        lay.b[j - 1][t - 1] = Some(b);
                        def = def.add_term(b, 1.0);
                        m.add_row(format!("b_up_{j}_{t}"), vec![(b, 1.0), (x, -p)], ninf, 0.0);
                        let scaled = LinExpr::default().add(&prev, p).add_term(b, -1.0);
                        m.add_expr_row(format!("b_lo_{j}_{t}"), scaled.clone(), 0.0, inf);
                        m.add_expr_row(format!("b_lnk_{j}_{t}"), scaled.add_term(x, p), ninf, p);
                    }
                    m.add_expr_row(format!("a_def_{j}_0"), def, 0.0, 0.0);
                    // layers e > 0
                    for e in 1..=gamma.min(j - 1) {
                        let lower = a_expr(&lay.a, j - 1, e - 1);
                        let same = a_expr(&lay.a, j - 1, e);
                        let mut def = a_expr(&lay.a, j, e).add(&same, -1.0);
                        let diff = lower.add(&same, -1.0);
                        for t in 1..=tm {
                            let (Some(x), p) = (lay.x[j - 1][t - 1], params.p_bar[j - 1][t - 1]) else {
                                continue;
                            };
                            if p <= 0.0 {
                                continue;
                            }
                            let c = m.add_var(format!("c_{j}_{e}_{t}"), VarKind::Continuous, -p, 0.0, 0.0);
                            lay.c[j - 1][e - 1][t - 1] = Some(c);
                            def = def.add_term(c, -1.0);
                            m.add_row(format!("c_lo_{j}_{e}_{t}"), vec![(c, 1.0), (x, p)], 0.0, inf);
                            let scaled = LinExpr::default().add(&diff, p).add_term(c, -1.0);
                            m.add_expr_row(format!("c_up_{j}_{e}_{t}"), scaled.clone(), ninf, 0.0);
                            m.add_expr_row(format!("c_lnk_{j}_{e}_{t}"), scaled.add_term(x, -p), -p, inf);
                        }
                        m.add_expr_row(format!("a_def_{j}_{e}"), def, 0.0, 0.0);
                    }
                }
                let top = lay.a[nj][gamma].expect("a_{J,gamma} is a variable when J > gamma");
                m.add_row("z2", vec![(top, 1.0)], 1.0 - instance.beta, inf);
            }
            Z2Mode::SampleBased { samples, seed } => {
                let mut g = rng::stream(seed, &[0x5a2]);
                let big_m = (nj - gamma) as f64;
                for s in 0..samples {
                    let zs = m.add_var(format!("viol_{s}"), VarKind::Binary, 0.0, 1.0, 0.0);
                    lay.scenarios.push(zs);
                    let mut coeffs = Vec::new();
                    for j in 0..nj {
                        let u: f64 = g.random();
                        for t in 1..=tm {
                            if let Some(x) = lay.x[j][t - 1] {
                                if u <= params.p_bar[j][t - 1] && params.p_bar[j][t - 1] > 0.0 {
                                    coeffs.push((x, 1.0));
                                }
                            }
                        }
                    }
                    coeffs.push((zs, -big_m));
                    m.add_row(format!("scenario_{s}"), coeffs, ninf, gamma as f64);
                }
                let budget = (instance.beta * samples as f64 + 1e-9).floor();
                let coeffs = lay.scenarios.iter().map(|&v| (v, 1.0)).collect();
                m.add_row("scenario_budget", coeffs, ninf, budget);
            }
            Z2Mode::Off => {}
        }
    }

    Ok(BuiltModel {
        milp: m,
        z2,
        variant: variant.clone(),
        layout: lay,
        n_components: nj,
        t_max: tm,
    })
}

/// All decision values of a solved model. Binary and integer values are
/// rounded; epochs are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub mip_gap: Option<f64>,
    pub wall_time_s: f64,
    pub z2: Z2Mode,
    pub variant: Variant,
    pub size: ModelSize,
    pub repair_epochs: Vec<Option<usize>>,
    pub x: Vec<Vec<bool>>,
    pub y: Vec<Vec<bool>>,
    pub z: Vec<bool>,
    pub r: Vec<bool>,
    pub h: Vec<Vec<i64>>,
    pub g_reg: Vec<Vec<i64>>,
    pub g_exp: Vec<Vec<i64>>,
    /// `a[j][e]` including the constant entries; empty unless Z2 is exact.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<Vec<f64>>>,
    pub scenario_violations: Vec<bool>,
}

impl Solution {
    pub fn has_values(&self) -> bool {
        self.status.has_solution()
    }

    /// Solver value of `a_{J,gamma}` when the exact block was built.
    pub fn a_top(&self) -> Option<f64> {
        self.a.last().and_then(|row| row.last()).copied()
    }
}

/// Objective split into the six cost families.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub maintenance: f64,
    pub downtime: f64,
    pub crew: f64,
    pub order_fixed: f64,
    pub holding: f64,
    pub ordering: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.maintenance_side() + self.inventory_side()
    }

    pub fn maintenance_side(&self) -> f64 {
        self.maintenance + self.downtime + self.crew
    }

    pub fn inventory_side(&self) -> f64 {
        self.order_fixed + self.holding + self.ordering
    }
}

pub fn cost_breakdown(instance: &ProblemInstance, params: &PrecomputedParams, sol: &Solution) -> CostBreakdown {
    let mut cb = CostBreakdown::default();
    for (j, row) in sol.x.iter().enumerate() {
        for (ti, &on) in row.iter().enumerate() {
            if on {
                cb.maintenance += params.psi[j][ti];
            }
        }
    }
    for (k, row) in sol.y.iter().enumerate() {
        cb.downtime += instance.machines[k].c_down * row.iter().filter(|&&b| b).count() as f64;
    }
    cb.crew = instance.c_crew * sol.z.iter().filter(|&&b| b).count() as f64;
    cb.order_fixed = instance.b_reg * sol.r.iter().filter(|&&b| b).count() as f64;
    for (l, s) in instance.spare_types.iter().enumerate() {
        if let Some(h) = sol.h.get(l) {
            cb.holding += s.c_hold * h.iter().sum::<i64>() as f64;
            cb.ordering += s.c_reg * sol.g_reg[l].iter().sum::<i64>() as f64;
            cb.ordering += s.c_exp * sol.g_exp[l].iter().sum::<i64>() as f64;
        }
    }
    cb
}

fn extract(built: &BuiltModel, values: &[f64]) -> Solution {
    let lay = &built.layout;
    let bin = |v: &VarId| values[v.0] > 0.5;
    let int = |v: &VarId| values[v.0].round() as i64;
    let val = |o: &Option<VarId>| o.map_or(0.0, |v| values[v.0]);
    let tm = built.t_max;
    let (x, repair_epochs): (Vec<Vec<bool>>, Vec<Option<usize>>) = match &built.variant {
        Variant::InventoryOnly { repair_epochs } => (
            repair_epochs
                .iter()
                .map(|&e| (1..=tm).map(|t| t == e).collect())
                .collect(),
            repair_epochs.iter().map(|&e| Some(e)).collect(),
        ),
        _ => {
            let x: Vec<Vec<bool>> = lay
                .x
                .iter()
                .map(|row| row.iter().map(|o| o.as_ref().is_some_and(bin)).collect())
                .collect();
            let ep = x.iter().map(|row| row.iter().position(|&b| b).map(|i| i + 1)).collect();
            (x, ep)
        }
    };
    let a = lay
        .a
        .iter()
        .map(|row| row.iter().map(|o| o.map_or(1.0, |v| values[v.0])).collect())
        .collect();
    Solution {
        status: SolveStatus::Optimal,
        objective: None,
        mip_gap: None,
        wall_time_s: 0.0,
        z2: built.z2,
        variant: built.variant.clone(),
        size: built.size(),
        repair_epochs,
        x,
        y: lay.y.iter().map(|r| r.iter().map(bin).collect()).collect(),
        z: lay.z.iter().map(bin).collect(),
        r: lay.r.iter().map(bin).collect(),
        h: lay.h.iter().map(|r| r.iter().map(int).collect()).collect(),
        g_reg: lay.g_reg.iter().map(|r| r.iter().map(int).collect()).collect(),
        g_exp: lay.g_exp.iter().map(|r| r.iter().map(int).collect()).collect(),
        a,
        b: lay.b.iter().map(|r| r.iter().map(val).collect()).collect(),
        c: lay
            .c
            .iter()
            .map(|m| m.iter().map(|r| r.iter().map(val).collect()).collect())
            .collect(),
        scenario_violations: lay.scenarios.iter().map(bin).collect(),
    }
}

fn empty_solution(built: &BuiltModel, status: SolveStatus, wall: f64) -> Solution {
    Solution {
        status,
        objective: None,
        mip_gap: None,
        wall_time_s: wall,
        z2: built.z2,
        variant: built.variant.clone(),
        size: built.size(),
        repair_epochs: vec![None; built.n_components],
        x: Vec::new(),
        y: Vec::new(),
        z: Vec::new(),
        r: Vec::new(),
        h: Vec::new(),
        g_reg: Vec::new(),
        g_exp: Vec::new(),
        a: Vec::new(),
        b: Vec::new(),
        c: Vec::new(),
        scenario_violations: Vec::new(),
    }
}

/// Solves a built model. Infeasibility and time limits are reported through
/// [`Solution::status`], never as errors.
pub fn solve(built: &BuiltModel, solver: &dyn MilpSolver, opts: &SolveOptions) -> Result<Solution> {
    let res = solver.solve(&built.milp, opts)?;
    let wall = res.wall_time.as_secs_f64();
    if !res.status.has_solution() {
        return Ok(empty_solution(built, res.status, wall));
    }
    let mut sol = extract(built, &res.values);
    sol.status = res.status;
    sol.objective = res.objective;
    sol.mip_gap = res.mip_gap;
    sol.wall_time_s = wall;
    Ok(sol)
}

/// Builds with the default backend and solves in one call.
pub fn build_and_solve(
    instance: &ProblemInstance,
    params: &PrecomputedParams,
    z2: Z2Mode,
    variant: &Variant,
    opts: &SolveOptions,
) -> Result<Solution> {
    let built = build_milp(instance, params, z2, variant)?;
    let solver = crate::milp::default_backend()?;
    solve(&built, solver.as_ref(), opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub violations: Vec<String>,
    /// Exact worst-case probability of at most `gamma` unexpected failures.
    pub z2_probability: Option<f64>,
    pub z2_exact_feasible: Option<bool>,
    pub solver_a: Option<f64>,
    pub recomputed_objective: Option<f64>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks a solution arithmetically. Deterministic constraints and, for
/// exact Z2, the solver's `a_{J,gamma}` against the recursion are violations;
/// for other Z2 modes the exact feasibility is only reported.
pub fn verify_solution(instance: &ProblemInstance, params: &PrecomputedParams, sol: &Solution) -> VerificationReport {
    let mut v = Vec::new();
    let mut rep = VerificationReport {
        violations: Vec::new(),
        z2_probability: None,
        z2_exact_feasible: None,
        solver_a: sol.a_top(),
        recomputed_objective: None,
    };
    if !sol.has_values() {
        rep.violations.push(format!("no solution to verify (status {:?})", sol.status));
        return rep;
    }
    let nj = instance.n_components();
    let tm = instance.t_max;
    let tol = VERIFY_TOL;
    let with_maint = !matches!(sol.variant, Variant::InventoryOnly { .. });
    let with_inv = !matches!(sol.variant, Variant::MaintenanceOnly);

    for j in 0..nj {
        let n = sol.x[j].iter().filter(|&&b| b).count();
        if n != 1 {
            v.push(format!("component {j}: {n} repairs scheduled, expected exactly 1"));
        }
        if with_maint {
            if let Some(t) = sol.repair_epochs[j] {
                if !params.u(j, t) {
                    v.push(format!("component {j}: repair at {t} is not before cutoff {}", params.t_star[j]));
                }
            }
        }
    }
    let repairs_at = |t: usize, set: &mut dyn Iterator<Item = usize>| set.filter(|&j| sol.x[j][t - 1]).count();
    if with_maint {
        let cap = instance.crew_capacity();
        for t in 1..=tm {
            let n = repairs_at(t, &mut (0..nj));
            if n > cap * sol.z[t - 1] as usize {
                v.push(format!("epoch {t}: {n} repairs exceed crew capacity {cap} x z={}", sol.z[t - 1] as u8));
            }
            for k in 0..instance.machines.len() {
                let members = instance.machine_members(k);
                let n = repairs_at(t, &mut members.iter().copied());
                if n > 0 && !sol.y[k][t - 1] {
                    v.push(format!("epoch {t}: machine {k} repairs {n} components while running"));
                }
            }
        }
    }
    if with_inv {
        for t in 1..=tm {
            let ordered: i64 = sol.g_reg.iter().map(|g| g[t - 1]).sum();
            let cap = instance.supplier_capacity.at(t) * sol.r[t - 1] as u8 as f64;
            if ordered as f64 > cap + tol {
                v.push(format!("epoch {t}: regular orders {ordered} exceed capacity {cap}"));
            }
        }
        let lt = instance.lead_time;
        for (l, s) in instance.spare_types.iter().enumerate() {
            let members = instance.spare_members(l);
            let mut prev = s.initial_stock as i64;
            for t in 1..=tm {
                let arrivals = if t <= lt { s.arrival(t) as i64 } else { sol.g_reg[l][t - lt - 1] };
                let used = repairs_at(t, &mut members.iter().copied()) as i64;
                let want = prev + sol.g_exp[l][t - 1] + arrivals - used;
                let h = sol.h[l][t - 1];
                if h != want {
                    v.push(format!("spare type {l}, epoch {t}: inventory {h} but balance gives {want}"));
                }
                if h < 0 {
                    v.push(format!("spare type {l}, epoch {t}: negative inventory {h}"));
                }
                prev = h;
            }
        }
    }
    let cb = cost_breakdown(instance, params, sol);
    // each variant prices only the cost families it models
    let priced = match (with_maint, with_inv) {
        (true, true) => cb.total(),
        (true, false) => cb.maintenance_side(),
        _ => cb.inventory_side(),
    };
    rep.recomputed_objective = Some(priced);
    if let Some(obj) = sol.objective {
        if (obj - priced).abs() > tol * (1.0 + obj.abs()) {
            v.push(format!("objective {obj} differs from recomputed {priced}"));
        }
    }
    if with_maint && sol.repair_epochs.iter().all(Option::is_some) {
        match check_z2_probability(&sol.repair_epochs, &params.p_bar, instance.gamma, instance.beta) {
            Ok((p, feasible)) => {
                rep.z2_probability = Some(p);
                rep.z2_exact_feasible = Some(feasible);
                if sol.z2 == Z2Mode::Exact {
                    if !feasible {
                        v.push(format!("exact Z2 solution has probability {p} < {}", 1.0 - instance.beta));
                    }
                    if let Some(a) = rep.solver_a {
                        if (a - p).abs() > tol {
                            v.push(format!("solver a_(J,gamma) = {a} but recursion gives {p}"));
                        }
                    }
                }
            }
            Err(e) => v.push(format!("Z2 check failed: {e}")),
        }
    }
    rep.violations = v;
    rep
}
