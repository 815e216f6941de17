//! Worst-case parameters over a type-∞ Wasserstein ball around each empirical
//! RLD, and the exact Poisson-binomial CDF.
//!
//! For a ball of radius `delta` every sample may move anywhere in
//! `[w - delta, w + delta]` (intersected with the support), independently of
//! the others. The worst-case expectation, probability, and quantile
//! conditions therefore decompose sample by sample:
//!
//! * `psi_jt`: mean over samples of the worst repair cost `theta_ijt`.
//! * `u_jt`: downtime condition holds for at least `1 - eps` of the samples
//!   moved as early as possible; stored as the cutoff `t*_j`.
//! * `p_bar_jt`: share of samples that can be moved to `<= t`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::prognostics::EmpiricalRld;
use crate::{Error, Result};

/// Tolerance used when clamping accumulated probabilities.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityConfig {
    /// Normalised radius; the per-component radius is `delta * sigma_j`.
    pub delta: f64,
}

impl AmbiguityConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
        }
        Ok(AmbiguityConfig { delta })
    }

    pub fn radius(&self, rld: &EmpiricalRld) -> f64 {
        self.delta * rld.sigma_hat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceCosts {
    pub c_pr: f64,
    pub v_pr: f64,
    pub c_co: f64,
    pub v_co: f64,
}

impl MaintenanceCosts {
    pub fn validate(&self) -> Result<()> {
        if [self.c_pr, self.v_pr, self.c_co, self.v_co]
            .iter()
            .any(|c| !(*c >= 0.0))
        {
            return Err(Error::InvalidParameter(format!("negative maintenance cost in {self:?}")));
        }
        if self.c_pr > self.c_co || self.v_pr > self.v_co {
            warn!("preventive costs exceed corrective costs: {self:?}");
        }
        Ok(())
    }
}

/// Realised repair cost for remaining life `omega` and repair epoch `t`.
/// A repair at `t >= omega` is corrective.
pub fn alpha(omega: f64, t: f64, costs: &MaintenanceCosts) -> f64 {
    if omega > t {
        costs.c_pr + costs.v_pr * (omega - t)
    } else {
        costs.c_co + costs.v_co * (t - omega)
    }
}

/// Worst repair cost when sample `omega` may move by up to `delta` within `[0, xi_max]`.
pub fn theta(omega: f64, delta: f64, t: f64, costs: &MaintenanceCosts, xi_max: f64) -> f64 {
    let preventive = (t < omega + delta)
        .then(|| costs.c_pr + costs.v_pr * ((omega + delta).min(xi_max) - t));
    let corrective = (omega - delta <= t)
        .then(|| costs.c_co + costs.v_co * (t - (omega - delta).max(0.0)));
    match (preventive, corrective) {
        (Some(p), Some(c)) => p.max(c),
        (Some(p), None) => p,
        (None, Some(c)) => c,
        (None, None) => unreachable!("with delta >= 0 one of the branches always applies"),
    }
}

pub fn psi(rld: &EmpiricalRld, delta: f64, t: usize, costs: &MaintenanceCosts) -> f64 {
    let t = t as f64;
    rld.samples
        .iter()
        .map(|&w| theta(w, delta, t, costs, rld.tau_max))
        .sum::<f64>()
        / rld.len() as f64
}

fn meets_share(count: usize, n: usize, share: f64) -> bool {
    count as f64 >= share * n as f64 - 1e-9
}

/// Downtime cap `rho` is met with worst-case probability at least `1 - eps`.
pub fn u(rld: &EmpiricalRld, delta: f64, t: usize, rho: f64, eps: f64) -> bool {
    let t = t as f64;
    let ok = rld
        .samples
        .iter()
        .filter(|&&w| (t - (w - delta).max(0.0)).max(0.0) <= rho)
        .count();
    meets_share(ok, rld.len(), 1.0 - eps)
}

/// First epoch in `1..=t_max` with `u = 0`, or `t_max + 1`. Binary search on
/// the monotone indicator.
pub fn t_star(rld: &EmpiricalRld, delta: f64, rho: f64, eps: f64, t_max: usize) -> usize {
    let (mut lo, mut hi) = (1usize, t_max + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if u(rld, delta, mid, rho, eps) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Worst-case probability that the component has failed by epoch `t`.
pub fn p_bar(rld: &EmpiricalRld, delta: f64, t: usize) -> f64 {
    let t = t as f64;
    let hits = rld.samples.iter().filter(|&&w| w - delta <= t).count();
    hits as f64 / rld.len() as f64
}

fn clamp_prob(p: f64) -> f64 {
    debug_assert!(p > -PROB_TOL && p < 1.0 + PROB_TOL, "probability {p} out of range");
    p.clamp(0.0, 1.0)
}

/// `P{sum of independent Bernoulli(p_i) <= m}` by the forward recursion,
/// O(n·m) time and O(m) memory.
pub fn pbinom_cdf(ps: &[f64], m: usize) -> f64 {
    let n = ps.len();
    if m >= n {
        return 1.0;
    }
    // v[k] holds P{first j variables sum to <= k}
    let mut v = vec![1.0; m + 1];
    for (idx, &p) in ps.iter().enumerate() {
        let j = idx + 1;
        for k in (0..=m.min(j)).rev() {
            v[k] = if j <= k {
                1.0
            } else if k == 0 {
                clamp_prob(v[0] * (1.0 - p))
            } else {
                clamp_prob(v[k - 1] * p + v[k] * (1.0 - p))
            };
        }
    }
    v[m]
}

/// The full `(n + 1) x (m + 1)` table `v[j][k]` of the recursion.
pub fn pbinom_table(ps: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = ps.len();
    let mut v = vec![vec![1.0; m + 1]; n + 1];
    for j in 1..=n {
        let p = ps[j - 1];
        for k in 0..=m {
            v[j][k] = if j <= k {
                1.0
            } else if k == 0 {
                clamp_prob(v[j - 1][0] * (1.0 - p))
            } else {
                clamp_prob(v[j - 1][k - 1] * p + v[j - 1][k] * (1.0 - p))
            };
        }
    }
    v
}

/// Probability of at most `gamma` unexpected failures when component `j`
/// is repaired at `epochs[j]`, and whether it reaches `1 - beta`.
pub fn check_z2_probability(
    epochs: &[Option<usize>],
    p_bar: &[Vec<f64>],
    gamma: usize,
    beta: f64,
) -> Result<(f64, bool)> {
    if epochs.len() != p_bar.len() {
        return Err(Error::Dimension(format!(
            "{} repair epochs for {} components",
            epochs.len(),
            p_bar.len()
        )));
    }
    let mut ps = Vec::with_capacity(epochs.len());
    for (j, e) in epochs.iter().enumerate() {
        let t = e.ok_or(Error::MissingRepairEpoch(j))?;
        let row = &p_bar[j];
        if t == 0 || t > row.len() {
            return Err(Error::Dimension(format!("component {j}: epoch {t} outside 1..={}", row.len())));
        }
        ps.push(row[t - 1]);
    }
    let prob = pbinom_cdf(&ps, gamma);
    Ok((prob, prob >= 1.0 - beta - 1e-12))
}

/// Everything the MILP needs from the RLDs. Matrices are indexed
/// `[component][epoch - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecomputedParams {
    pub psi: Vec<Vec<f64>>,
    pub t_star: Vec<usize>,
    pub p_bar: Vec<Vec<f64>>,
}

impl PrecomputedParams {
    pub fn n_components(&self) -> usize {
        self.psi.len()
    }

    pub fn t_max(&self) -> usize {
        self.psi.first().map_or(0, Vec::len)
    }

    /// `u_jt` recovered from the cutoff, `t` is 1-based.
    pub fn u(&self, j: usize, t: usize) -> bool {
        t < self.t_star[j]
    }

    pub fn check_dims(&self, n_components: usize, t_max: usize) -> Result<()> {
        let ok = self.psi.len() == n_components
            && self.p_bar.len() == n_components
            && self.t_star.len() == n_components
            && self.psi.iter().all(|r| r.len() == t_max)
            && self.p_bar.iter().all(|r| r.len() == t_max);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "precomputed parameters do not match {n_components} components x {t_max} epochs"
            )))
        }
    }
}

/// Eagerly evaluates `psi`, `t*`, and `p_bar` over all components and epochs.
pub fn precompute(
    rlds: &[EmpiricalRld],
    costs: &[MaintenanceCosts],
    ambiguity: AmbiguityConfig,
    rho: f64,
    eps: f64,
    t_max: usize,
) -> Result<PrecomputedParams> {
    if rlds.len() != costs.len() {
        return Err(Error::Dimension(format!(
            "{} RLDs for {} components",
            rlds.len(),
            costs.len()
        )));
    }
    if !(rho >= 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("need rho >= 0 and 0 < eps < 1, got {rho}, {eps}")));
    }
    if let Some(j) = rlds.iter().position(|r| r.is_empty()) {
        return Err(Error::InvalidParameter(format!("component {j} has an empty RLD")));
    }
    let mut params = PrecomputedParams {
        psi: Vec::with_capacity(rlds.len()),
        t_star: Vec::with_capacity(rlds.len()),
        p_bar: Vec::with_capacity(rlds.len()),
    };
    for (rld, c) in rlds.iter().zip(costs) {
        let delta = ambiguity.radius(rld);
        params.psi.push((1..=t_max).map(|t| psi(rld, delta, t, c)).collect());
        params.t_star.push(t_star(rld, delta, rho, eps, t_max));
        params.p_bar.push((1..=t_max).map(|t| p_bar(rld, delta, t)).collect());
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    const COSTS: MaintenanceCosts = MaintenanceCosts {
        c_pr: 1.3,
        v_pr: 0.13,
        c_co: 7.8,
        v_co: 0.78,
    };

    fn rld(s: &[f64]) -> EmpiricalRld {
        EmpiricalRld::from_samples(s.to_vec(), 50.0).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn alpha_branches() {
        assert!(close(alpha(20.0, 15.0, &COSTS), 1.95));
        assert!(close(alpha(10.0, 15.0, &COSTS), 11.7));
        assert!(close(alpha(15.0, 15.0, &COSTS), COSTS.c_co));
    }

    #[test]
    fn theta_cases() {
        for t in 1..30 {
            let t = t as f64;
            assert_eq!(theta(10.0, 0.0, t, &COSTS, 50.0), alpha(10.0, t, &COSTS));
        }
        assert!(close(theta(10.0, 2.0, 11.0, &COSTS, 50.0), 10.14));
        assert!(close(theta(10.0, 2.0, 7.0, &COSTS, 50.0), 1.95));
    }

    #[test]
    fn psi_examples() {
        let r = rld(&[10.0, 20.0]);
        assert!(close(psi(&r, 0.0, 15, &COSTS), 6.825));
        assert!(psi(&r, 0.5, 15, &COSTS) >= psi(&r, 0.0, 15, &COSTS));
    }

    #[test]
    fn u_and_t_star_examples() {
        let r = rld(&[10.0, 12.0]);
        assert!(u(&r, 0.0, 14, 5.0, 0.1));
        assert!(!u(&r, 0.0, 16, 5.0, 0.1));
        assert!(u(&r, 0.0, 15, 5.0, 0.1));
        assert_eq!(t_star(&r, 0.0, 5.0, 0.1, 50), 16);
        assert_eq!(t_star(&r, 0.0, 50.0, 0.1, 50), 51);
        assert!((1..=50).all(|t| u(&r, 0.0, t, 50.0, 0.1)));
    }

    #[test]
    fn p_bar_examples() {
        let r = rld(&[10.0, 20.0, 30.0]);
        assert!(close(p_bar(&r, 2.0, 18), 2.0 / 3.0));
        assert!(close(p_bar(&r, 0.0, 20), 2.0 / 3.0));
        assert!(close(p_bar(&r, 0.0, 19), 1.0 / 3.0));
        for t in 0..40 {
            assert_eq!(p_bar(&r, 30.0, t), 1.0);
        }
    }

    #[test]
    fn pbinom_worked_example() {
        let ps = [0.1, 0.25, 0.8];
        let v = pbinom_table(&ps, 2);
        let want = [(1, 0, 0.9), (2, 0, 0.675), (3, 0, 0.135), (2, 1, 0.975), (3, 1, 0.735), (3, 2, 0.98)];
        for (j, k, x) in want {
            assert!((v[j][k] - x).abs() < 1e-12, "v[{j}][{k}] = {}", v[j][k]);
        }
        assert!((pbinom_cdf(&ps, 2) - 0.98).abs() < 1e-12);
        assert!((pbinom_cdf(&ps, 0) - 0.135).abs() < 1e-12);
        assert_eq!(pbinom_cdf(&ps, 3), 1.0);
        assert_eq!(pbinom_cdf(&ps, 7), 1.0);
        assert_eq!(pbinom_cdf(&[], 0), 1.0);
    }

    #[test]
    fn z2_check_examples() {
        let pb = vec![vec![0.1], vec![0.25], vec![0.8]];
        let e = [Some(1), Some(1), Some(1)];
        let (p, ok) = check_z2_probability(&e, &pb, 2, 0.1).unwrap();
        assert!((p - 0.98).abs() < 1e-12 && ok);
        let (p, ok) = check_z2_probability(&e, &pb, 0, 0.1).unwrap();
        assert!((p - 0.135).abs() < 1e-12 && !ok);
        let (p, ok) = check_z2_probability(&e, &pb, 3, 0.1).unwrap();
        assert!(p == 1.0 && ok);
        assert!(matches!(
            check_z2_probability(&[Some(1), None, Some(1)], &pb, 2, 0.1),
            Err(Error::MissingRepairEpoch(1))
        ));
    }

    #[test]
    fn precompute_dims_and_saa_collapse() {
        let rlds = vec![rld(&[10.0, 20.0]), rld(&[5.0, 7.0, 30.0])];
        let costs = vec![COSTS; 2];
        let p = precompute(&rlds, &costs, AmbiguityConfig::new(0.0).unwrap(), 5.0, 0.1, 20).unwrap();
        p.check_dims(2, 20).unwrap();
        for (j, r) in rlds.iter().enumerate() {
            for t in 1..=20 {
                let mean_alpha = r.samples.iter().map(|&w| alpha(w, t as f64, &COSTS)).sum::<f64>()
                    / r.len() as f64;
                assert!(close(p.psi[j][t - 1], mean_alpha));
                let ecdf = r.samples.iter().filter(|&&w| w <= t as f64).count() as f64 / r.len() as f64;
                assert_eq!(p.p_bar[j][t - 1], ecdf);
            }
        }
        assert!(AmbiguityConfig::new(-0.1).is_err());
    }
}
