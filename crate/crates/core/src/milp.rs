//! A small backend-neutral MILP container and the solver interface.
//!
//! Model code only ever touches [`Milp`]; a backend receives the finished
//! model and returns column values. HiGHS is the bundled backend (cargo
//! feature `highs`).

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub obj: f64,
}

/// `lb <= sum(coef * var) <= ub`; either side may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub lb: f64,
    pub ub: f64,
}

/// Linear expression with a constant term, used while building rows that mix
/// variables and fixed values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn add(mut self, other: &LinExpr, scale: f64) -> Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn add_term(mut self, v: VarId, c: f64) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn add_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Milp {
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSize {
    pub continuous: usize,
    pub integer: usize,
    pub binary: usize,
    pub constraints: usize,
}

impl Milp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64, obj: f64) -> VarId {
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            _ => (lb, ub),
        };
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lb,
            ub,
            obj,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(VarId, f64)>, lb: f64, ub: f64) {
        self.rows.push(Constraint {
            name: name.into(),
            coeffs,
            lb,
            ub,
        });
    }

    /// Adds `lb <= expr <= ub`, moving the constant to the bounds.
    pub fn add_expr_row(&mut self, name: impl Into<String>, expr: LinExpr, lb: f64, ub: f64) {
        let c = expr.constant;
        self.add_row(name, expr.terms, lb - c, ub - c);
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.obj * x).sum()
    }

    pub fn size(&self) -> ModelSize {
        let mut s = ModelSize {
            constraints: self.rows.len(),
            ..Default::default()
        };
        for v in &self.vars {
            match v.kind {
                VarKind::Continuous => s.continuous += 1,
                VarKind::Integer => s.integer += 1,
                VarKind::Binary => s.binary += 1,
            }
        }
        s
    }

    /// Largest bound or row violation of `values`, and whether integer
    /// columns are integral within `tol`.
    pub fn max_violation(&self, values: &[f64], tol: f64) -> (f64, bool) {
        let mut worst: f64 = 0.0;
        let mut integral = true;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lb - x).max(x - v.ub);
            if v.kind != VarKind::Continuous && (x - x.round()).abs() > tol {
                integral = false;
            }
        }
        for r in &self.rows {
            let act: f64 = r.coeffs.iter().map(|&(v, c)| c * values[v.0]).sum();
            worst = worst.max(r.lb - act).max(act - r.ub);
        }
        (worst, integral)
    }

    /// CPLEX LP text format.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::from("Minimize\n obj:");
        let mut any = false;
        for (i, v) in self.vars.iter().enumerate() {
            if v.obj != 0.0 {
                push_term(&mut out, v.obj, &lp_name(&self.vars, i));
                any = true;
            }
        }
        if !any {
            out.push_str(" 0 ");
            out.push_str(&lp_name(&self.vars, 0));
        }
        out.push_str("\nSubject To\n");
        for (k, r) in self.rows.iter().enumerate() {
            let mut body = String::new();
            for &(v, c) in &r.coeffs {
                push_term(&mut body, c, &lp_name(&self.vars, v.0));
            }
            if body.is_empty() {
                body.push_str(" 0 ");
                body.push_str(&lp_name(&self.vars, 0));
            }
            let name = sanitize(&format!("{}_{k}", r.name));
            if r.lb == r.ub {
                let _ = writeln!(out, " {name}:{body} = {}", r.lb);
            } else {
                if r.lb.is_finite() {
                    let _ = writeln!(out, " {name}_lo:{body} >= {}", r.lb);
                }
                if r.ub.is_finite() {
                    let _ = writeln!(out, " {name}_up:{body} <= {}", r.ub);
                }
            }
        }
        out.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            let n = lp_name(&self.vars, i);
            let lb = if v.lb.is_finite() { v.lb.to_string() } else { "-inf".into() };
            let ub = if v.ub.is_finite() { v.ub.to_string() } else { "+inf".into() };
            let _ = writeln!(out, " {lb} <= {n} <= {ub}");
        }
        let ints: Vec<String> = (0..self.vars.len())
            .filter(|&i| self.vars[i].kind == VarKind::Integer)
            .map(|i| lp_name(&self.vars, i))
            .collect();
        if !ints.is_empty() {
            let _ = writeln!(out, "General\n {}", ints.join(" "));
        }
        let bins: Vec<String> = (0..self.vars.len())
            .filter(|&i| self.vars[i].kind == VarKind::Binary)
            .map(|i| lp_name(&self.vars, i))
            .collect();
        if !bins.is_empty() {
            let _ = writeln!(out, "Binary\n {}", bins.join(" "));
        }
        out.push_str("End\n");
        out
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn lp_name(vars: &[Variable], i: usize) -> String {
    format!("{}_{i}", sanitize(&vars[i].name))
}

fn push_term(out: &mut String, c: f64, name: &str) {
    if c < 0.0 {
        let _ = write!(out, " - {} {name}", -c);
    } else {
        let _ = write!(out, " + {c} {name}");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub time_limit: Duration,
    pub mip_gap: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: Duration::from_secs(600),
            mip_gap: 1e-6,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleGap,
    Infeasible,
    TimeLimit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: Vec<f64>,
    pub mip_gap: Option<f64>,
    pub wall_time: Duration,
}

pub trait MilpSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &Milp, opts: &SolveOptions) -> Result<MilpResult>;
}

/// Returns a solver by identifier; `"highs"` is the only bundled backend.
pub fn backend(id: &str) -> Result<Box<dyn MilpSolver>> {
    match id {
        #[cfg(feature = "highs")]
        "highs" => Ok(Box::new(HighsSolver)),
        #[cfg(not(feature = "highs"))]
        "highs" => Err(Error::BackendUnavailable(
            "built without the `highs` feature; rebuild with --features highs".into(),
        )),
        other => Err(Error::BackendUnavailable(format!("unknown solver backend `{other}`"))),
    }
}

pub fn default_backend() -> Result<Box<dyn MilpSolver>> {
    backend("highs")
}

#[cfg(feature = "highs")]
pub use self::highs_backend::HighsSolver;

#[cfg(feature = "highs")]
mod highs_backend {
    use super::*;
    use highs::{HighsModelStatus, RowProblem, Sense};

    /// Single-threaded HiGHS branch-and-cut.
    #[derive(Debug, Clone, Copy, Default)]
    pub struct HighsSolver;

    impl MilpSolver for HighsSolver {
        fn name(&self) -> &'static str {
            "highs"
        }

        fn solve(&self, model: &Milp, opts: &SolveOptions) -> Result<MilpResult> {
            let start = Instant::now();
            if model.vars.is_empty() {
                return Ok(MilpResult {
                    status: SolveStatus::Optimal,
                    objective: Some(0.0),
                    values: Vec::new(),
                    mip_gap: Some(0.0),
                    wall_time: start.elapsed(),
                });
            }
            let mut pb = RowProblem::default();
            let cols: Vec<_> = model
                .vars
                .iter()
                .map(|v| {
                    let integral = v.kind != VarKind::Continuous;
                    pb.add_column_with_integrality(v.obj, v.lb..=v.ub, integral)
                })
                .collect();
            for r in &model.rows {
                let factors: Vec<_> = r.coeffs.iter().map(|&(v, c)| (cols[v.0], c)).collect();
                pb.add_row(r.lb..=r.ub, factors);
            }
            let mut m = pb
                .try_optimise(Sense::Minimise)
                .map_err(|e| Error::Solver(format!("HiGHS rejected the model: {e:?}")))?;
            m.make_quiet();
            m.set_option("mip_rel_gap", opts.mip_gap);
            m.set_option("time_limit", opts.time_limit.as_secs_f64());
            m.set_option("random_seed", (opts.seed % i32::MAX as u64) as i32);
            m.set_option("threads", opts.threads.max(1) as i32);
            m.set_option("primal_feasibility_tolerance", 1e-9);
            m.set_option("mip_feasibility_tolerance", 1e-9);
            let solved = m
                .try_solve()
                .map_err(|e| Error::Solver(format!("HiGHS run failed: {e:?}")))?;
            let status = solved.status();
            let wall_time = start.elapsed();
            let values = solved.get_solution().columns().to_vec();
            let has_values = values.len() == model.vars.len()
                && model.max_violation(&values, 1e-6).0 <= 1e-6;
            let gap = solved.mip_gap();
            let status = match status {
                HighsModelStatus::Optimal => SolveStatus::Optimal,
                HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
                    SolveStatus::Infeasible
                }
                HighsModelStatus::ReachedTimeLimit
                | HighsModelStatus::ReachedIterationLimit
                | HighsModelStatus::ReachedSolutionLimit
                | HighsModelStatus::ReachedInterrupt
                | HighsModelStatus::ReachedMemoryLimit => {
                    if has_values {
                        SolveStatus::FeasibleGap
                    } else {
                        SolveStatus::TimeLimit
                    }
                }
                other => return Err(Error::Solver(format!("HiGHS returned status {other:?}"))),
            };
            if status.has_solution() {
                let objective = model.objective_value(&values);
                Ok(MilpResult {
                    status,
                    objective: Some(objective),
                    values,
                    mip_gap: Some(if gap.is_finite() { gap } else { 0.0 }),
                    wall_time,
                })
            } else {
                Ok(MilpResult {
                    status,
                    objective: None,
                    values: Vec::new(),
                    mip_gap: None,
                    wall_time,
                })
            }
        }
    }
}
