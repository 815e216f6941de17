//! Comparison policies built on the same model: SAA, DRCC, a robust
//! worst-case planner and the sequential (maintenance first, spares second)
//! pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dro::{alpha, precompute, AmbiguityConfig, PrecomputedParams};
use crate::milp::{MilpSolver, SolveOptions};
use crate::model::{build_milp, cost_breakdown, solve, CostBreakdown, ProblemInstance, Solution, Variant, Z2Mode};
use crate::prognostics::EmpiricalRld;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineKind {
    Saa,
    Drcc { delta: f64 },
    Robust { delta: f64 },
    Sequential { delta: f64 },
}

impl BaselineKind {
    pub fn delta(&self) -> f64 {
        match *self {
            BaselineKind::Saa => 0.0,
            BaselineKind::Drcc { delta } | BaselineKind::Robust { delta } | BaselineKind::Sequential { delta } => delta,
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BaselineKind::Saa => write!(f, "SAA"),
            BaselineKind::Drcc { delta } => write!(f, "DRCC:{delta}"),
            BaselineKind::Robust { delta } if delta == 0.0 => write!(f, "Robust"),
            BaselineKind::Robust { delta } => write!(f, "Robust:{delta}"),
            BaselineKind::Sequential { delta } if delta == 0.0 => write!(f, "Sequential"),
            BaselineKind::Sequential { delta } => write!(f, "Sequential:{delta}"),
        }
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    /// Accepts `saa`, `drcc:<delta>`, `robust[:<delta>]`, `sequential[:<delta>]`
    /// and `joint` (DRCC at zero radius), case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let delta = match arg {
            Some(a) => a
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad radius in policy `{s}`")))?,
            None => 0.0,
        };
        if !(delta >= 0.0) {
            return Err(Error::Parse(format!("radius must be >= 0 in policy `{s}`")));
        }
        match (name, arg) {
            ("saa", None) => Ok(BaselineKind::Saa),
            ("joint", _) | ("drcc", Some(_)) => Ok(BaselineKind::Drcc { delta }),
            ("robust" | "rob", _) => Ok(BaselineKind::Robust { delta }),
            ("sequential" | "seq", _) => Ok(BaselineKind::Sequential { delta }),
            _ => Err(Error::Parse(format!("unknown policy `{s}`"))),
        }
    }
}

/// DRO parameters at normalised radius `delta`.
pub fn drcc_params(instance: &ProblemInstance, rlds: &[EmpiricalRld], delta: f64) -> Result<PrecomputedParams> {
    precompute(
        rlds,
        &instance.component_costs(),
        AmbiguityConfig::new(delta)?,
        instance.rho,
        instance.eps,
        instance.t_max,
    )
}

/// Each remaining life fixed at `max(min_i w_i - delta_j, 0)`. Costs become
/// the deterministic repair cost, repairs must satisfy `t <= w + rho`, and
/// the failure indicator is the point mass at the worst case, so any Z2
/// encoding caps the number of late repairs at `gamma` outright.
pub fn robust_params(instance: &ProblemInstance, rlds: &[EmpiricalRld], delta: f64) -> Result<PrecomputedParams> {
    if rlds.len() != instance.n_components() {
        return Err(Error::Dimension(format!(
            "{} RLDs for {} components",
            rlds.len(),
            instance.n_components()
        )));
    }
    let tm = instance.t_max;
    let mut p = PrecomputedParams {
        psi: Vec::new(),
        t_star: Vec::new(),
        p_bar: Vec::new(),
    };
    for (j, rld) in rlds.iter().enumerate() {
        let wc = (rld.min() - delta * rld.sigma_hat).max(0.0);
        let costs = &instance.components[j].costs;
        p.psi.push((1..=tm).map(|t| alpha(wc, t as f64, costs)).collect());
        p.t_star.push(((wc + instance.rho).floor() as usize + 1).min(tm + 1));
        p.p_bar.push((1..=tm).map(|t| if wc <= t as f64 { 1.0 } else { 0.0 }).collect());
    }
    Ok(p)
}

/// A solved policy: the parameters it used, the executed schedule and orders,
/// and the planned cost split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub kind: BaselineKind,
    pub params: PrecomputedParams,
    pub solution: Solution,
    /// Inventory stage of the sequential pipeline.
    pub inventory_stage: Option<Solution>,
    pub planned_cost: CostBreakdown,
}

impl Plan {
    pub fn repair_epochs(&self) -> &[Option<usize>] {
        &self.solution.repair_epochs
    }

    /// Regular orders `[spare type][epoch - 1]`.
    pub fn regular_orders(&self) -> &[Vec<i64>] {
        match &self.inventory_stage {
            Some(s) => &s.g_reg,
            None => &self.solution.g_reg,
        }
    }

    pub fn objective(&self) -> f64 {
        self.planned_cost.total()
    }
}

fn solved(sol: Solution, what: &str) -> Result<Solution> {
    if sol.has_values() {
        Ok(sol)
    } else {
        Err(Error::Infeasible(format!("{what}: solver status {:?}", sol.status)))
    }
}

/// Solves `kind` on `instance`. Infeasible or unsolved models are errors here
/// because a plan is required to act on.
pub fn plan(
    kind: BaselineKind,
    instance: &ProblemInstance,
    rlds: &[EmpiricalRld],
    z2: Z2Mode,
    solver: &dyn MilpSolver,
    opts: &SolveOptions,
) -> Result<Plan> {
    match kind {
        BaselineKind::Saa | BaselineKind::Drcc { .. } => {
            let params = drcc_params(instance, rlds, kind.delta())?;
            let built = build_milp(instance, &params, z2, &Variant::Joint)?;
            let sol = solved(solve(&built, solver, opts)?, &kind.to_string())?;
            let planned_cost = cost_breakdown(instance, &params, &sol);
            Ok(Plan {
                kind,
                params,
                solution: sol,
                inventory_stage: None,
                planned_cost,
            })
        }
        BaselineKind::Robust { delta } => {
            let params = robust_params(instance, rlds, delta)?;
            let built = build_milp(instance, &params, z2, &Variant::Joint)?;
            let sol = solved(solve(&built, solver, opts)?, &kind.to_string())?;
            let planned_cost = cost_breakdown(instance, &params, &sol);
            Ok(Plan {
                kind,
                params,
                solution: sol,
                inventory_stage: None,
                planned_cost,
            })
        }
        BaselineKind::Sequential { delta } => {
            let params = drcc_params(instance, rlds, delta)?;
            let (stage1, stage2) = run_sequential_with(instance, &params, z2, solver, opts)?;
            let m = cost_breakdown(instance, &params, &stage1);
            let i = cost_breakdown(instance, &params, &stage2);
            let planned_cost = CostBreakdown {
                maintenance: m.maintenance,
                downtime: m.downtime,
                crew: m.crew,
                order_fixed: i.order_fixed,
                holding: i.holding,
                ordering: i.ordering,
            };
            Ok(Plan {
                kind,
                params,
                solution: stage1,
                inventory_stage: Some(stage2),
                planned_cost,
            })
        }
    }
}

/// Maintenance-only stage followed by the inventory stage with repairs fixed.
pub fn run_sequential_with(
    instance: &ProblemInstance,
    params: &PrecomputedParams,
    z2: Z2Mode,
    solver: &dyn MilpSolver,
    opts: &SolveOptions,
) -> Result<(Solution, Solution)> {
    let built = build_milp(instance, params, z2, &Variant::MaintenanceOnly)?;
    let stage1 = solved(solve(&built, solver, opts)?, "sequential maintenance stage")?;
    let epochs: Vec<usize> = stage1
        .repair_epochs
        .iter()
        .map(|e| e.expect("every component has a repair in a solved model"))
        .collect();
    let built = build_milp(instance, params, Z2Mode::Off, &Variant::InventoryOnly { repair_epochs: epochs })?;
    let stage2 = solve(&built, solver, opts)?;
    assert!(
        stage2.has_values() || stage2.status == crate::milp::SolveStatus::TimeLimit,
        "inventory stage cannot be infeasible: expedited orders always cover demand"
    );
    let stage2 = solved(stage2, "sequential inventory stage")?;
    Ok((stage1, stage2))
}

pub fn run_saa(instance: &ProblemInstance, rlds: &[EmpiricalRld], z2: Z2Mode, opts: &SolveOptions) -> Result<Plan> {
    let solver = crate::milp::default_backend()?;
    plan(BaselineKind::Saa, instance, rlds, z2, solver.as_ref(), opts)
}

pub fn run_drcc(
    instance: &ProblemInstance,
    rlds: &[EmpiricalRld],
    delta: f64,
    z2: Z2Mode,
    opts: &SolveOptions,
) -> Result<Plan> {
    let solver = crate::milp::default_backend()?;
    plan(BaselineKind::Drcc { delta }, instance, rlds, z2, solver.as_ref(), opts)
}

pub fn run_robust(
    instance: &ProblemInstance,
    rlds: &[EmpiricalRld],
    delta: f64,
    z2: Z2Mode,
    opts: &SolveOptions,
) -> Result<Plan> {
    let solver = crate::milp::default_backend()?;
    plan(BaselineKind::Robust { delta }, instance, rlds, z2, solver.as_ref(), opts)
}

pub fn run_sequential(
    instance: &ProblemInstance,
    rlds: &[EmpiricalRld],
    delta: f64,
    z2: Z2Mode,
    opts: &SolveOptions,
) -> Result<Plan> {
    let solver = crate::milp::default_backend()?;
    plan(BaselineKind::Sequential { delta }, instance, rlds, z2, solver.as_ref(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!("saa".parse::<BaselineKind>().unwrap(), BaselineKind::Saa);
        assert_eq!("DRCC:0.2".parse::<BaselineKind>().unwrap(), BaselineKind::Drcc { delta: 0.2 });
        assert_eq!("robust".parse::<BaselineKind>().unwrap(), BaselineKind::Robust { delta: 0.0 });
        assert_eq!("joint".parse::<BaselineKind>().unwrap(), BaselineKind::Drcc { delta: 0.0 });
        assert_eq!("sequential".parse::<BaselineKind>().unwrap(), BaselineKind::Sequential { delta: 0.0 });
        assert!("drcc".parse::<BaselineKind>().is_err());
        assert!("drcc:-1".parse::<BaselineKind>().is_err());
        assert!("mdp".parse::<BaselineKind>().is_err());
        for k in [BaselineKind::Saa, BaselineKind::Drcc { delta: 0.1 }, BaselineKind::Robust { delta: 0.0 }] {
            assert_eq!(k.to_string().parse::<BaselineKind>().unwrap(), k);
        }
    }
}
