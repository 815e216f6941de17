//! Two-phase exponential degradation signals.
//!
//! Phase I holds the signal at a constant level `phi` for a random length
//! `tau ~ U(a, b)`. Phase II follows `theta * exp(beta * (t - tau) + W(t - tau))`
//! where `W` is a Brownian path with variance `sigma^2` per unit time, realised
//! by accumulating independent Gaussian increments on the sampling grid. The
//! signal stops at the first grid point at or above the failure threshold.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// Default non-termination cap, as a multiple of the upper Phase-I bound.
pub const DEFAULT_CAP_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTypeParams {
    pub type_id: usize,
    /// Constant Phase-I signal level.
    pub phi: f64,
    /// Uniform bounds `(a, b)` on the Phase-I length.
    pub tau_range: (f64, f64),
    /// Normal `(mean, sd)` of `ln theta`.
    pub log_theta_prior: (f64, f64),
    /// Normal `(mean, sd)` of `ln beta`.
    pub log_beta_prior: (f64, f64),
    /// Brownian volatility per unit time.
    pub bm_sigma: f64,
    pub failure_threshold: f64,
    pub dt: f64,
    /// Upper support bound for remaining life.
    pub tau_max: f64,
    /// Hard cap on simulated time; defaults to `100 * b`.
    #[serde(default)]
    pub time_cap: Option<f64>,
}

impl ComponentTypeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("type {}: {m}", self.type_id)));
        let (a, b) = self.tau_range;
        if !(a >= 0.0 && b > a) {
            return bad("tau_range must satisfy 0 <= a < b");
        }
        // Zero volatilities are allowed so deterministic worlds can be built.
        if !(self.log_theta_prior.1 >= 0.0 && self.log_beta_prior.1 >= 0.0 && self.bm_sigma >= 0.0) {
            return bad("standard deviations must be non-negative");
        }
        if !(self.phi > 0.0 && self.failure_threshold > self.phi) {
            return bad("need failure_threshold > phi > 0");
        }
        if !(self.dt > 0.0 && self.tau_max > 0.0) {
            return bad("dt and tau_max must be positive");
        }
        if let Some(cap) = self.time_cap {
            if !(cap > 0.0) {
                return bad("time_cap must be positive");
            }
        }
        Ok(())
    }

    pub fn time_cap(&self) -> f64 {
        self.time_cap
            .unwrap_or(DEFAULT_CAP_FACTOR * self.tau_range.1)
    }
}

/// The `(tau, theta, beta)` draw behind one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedParams {
    pub tau: f64,
    pub theta: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSignal {
    pub type_id: usize,
    /// `(t, S(t))` on a grid of spacing `dt`, starting at `t = 0`.
    pub samples: Vec<(f64, f64)>,
    pub failure_time: f64,
    pub realized: RealizedParams,
    pub phi: f64,
    pub failure_threshold: f64,
    pub dt: f64,
}

/// Prefix of a signal up to a given age, with the hidden residual life kept for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSignal {
    pub type_id: usize,
    pub samples: Vec<(f64, f64)>,
    pub age: f64,
    pub true_residual: f64,
    pub phi: f64,
    pub failure_threshold: f64,
    pub dt: f64,
}

/// True when `s` is off the constant Phase-I level.
pub fn is_degradation_sample(s: f64, phi: f64) -> bool {
    (s - phi).abs() > 1e-12 * phi.abs().max(1.0)
}

impl ObservedSignal {
    /// Samples belonging to Phase II.
    pub fn degradation_samples(&self) -> impl Iterator<Item = &(f64, f64)> {
        let phi = self.phi;
        self.samples
            .iter()
            .filter(move |(_, s)| is_degradation_sample(*s, phi))
    }

    pub fn last_value(&self) -> f64 {
        self.samples.last().map(|&(_, s)| s).unwrap_or(self.phi)
    }
}

impl DegradationSignal {
    pub fn observe_all(&self) -> ObservedSignal {
        ObservedSignal {
            type_id: self.type_id,
            samples: self.samples.clone(),
            age: self.failure_time,
            true_residual: 0.0,
            phi: self.phi,
            failure_threshold: self.failure_threshold,
            dt: self.dt,
        }
    }
}

pub fn draw_realized<R: Rng>(params: &ComponentTypeParams, rng: &mut R) -> Result<RealizedParams> {
    let (a, b) = params.tau_range;
    let tau = Uniform::new(a, b)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng);
    let normal = |(m, s): (f64, f64)| {
        Normal::new(m, s).map_err(|e| Error::InvalidParameter(e.to_string()))
    };
    let theta = normal(params.log_theta_prior)?.sample(rng).exp();
    let beta = normal(params.log_beta_prior)?.sample(rng).exp();
    Ok(RealizedParams { tau, theta, beta })
}

/// Simulates one signal. The same `(params, seed)` always yields the same signal.
pub fn simulate_signal(params: &ComponentTypeParams, seed: u64) -> Result<DegradationSignal> {
    params.validate()?;
    let mut rng = rng::stream(seed, &[]);
    let realized = draw_realized(params, &mut rng)?;
    run_signal(params, realized, &mut rng)
}

/// Simulates a signal for fixed `(tau, theta, beta)`; only the Brownian noise is random.
pub fn simulate_signal_with(
    params: &ComponentTypeParams,
    realized: RealizedParams,
    seed: u64,
) -> Result<DegradationSignal> {
    params.validate()?;
    if !(realized.tau >= 0.0 && realized.theta > 0.0 && realized.beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad realized params {realized:?}")));
    }
    let mut rng = rng::stream(seed, &[]);
    run_signal(params, realized, &mut rng)
}

fn run_signal(
    params: &ComponentTypeParams,
    realized: RealizedParams,
    rng: &mut ChaCha8Rng,
) -> Result<DegradationSignal> {
    let cap = params.time_cap();
    let RealizedParams { tau, theta, beta } = realized;
    let mut samples = vec![(0.0, params.phi)];
    let mut noise = 0.0;
    let mut noise_t = tau;
    let mut k: u64 = 0;
    loop {
        k += 1;
        let t = k as f64 * params.dt;
        if t > cap {
            return Err(Error::NoThresholdCrossing { cap });
        }
        let s = if t <= tau {
            params.phi
        } else {
            let step = t - noise_t;
            let z: f64 = StandardNormal.sample(rng);
            noise += params.bm_sigma * step.sqrt() * z;
            noise_t = t;
            theta * (beta * (t - tau) + noise).exp()
        };
        samples.push((t, s));
        if s >= params.failure_threshold {
            return Ok(DegradationSignal {
                type_id: params.type_id,
                samples,
                failure_time: t,
                realized,
                phi: params.phi,
                failure_threshold: params.failure_threshold,
                dt: params.dt,
            });
        }
    }
}

/// `n` independent signals; signal `i` is seeded from `(seed, i)`.
pub fn generate_dataset(
    params: &ComponentTypeParams,
    n: usize,
    seed: u64,
) -> Result<Vec<DegradationSignal>> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset size must be at least 1".into()));
    }
    (0..n)
        .map(|i| simulate_signal(params, rng::derive_seed(seed, &[i as u64])))
        .collect()
}

/// Keeps the samples with `t <= age` and records the hidden residual life.
pub fn truncate_at_age(signal: &DegradationSignal, age: f64) -> Result<ObservedSignal> {
    if !(age >= 0.0) {
        return Err(Error::InvalidParameter(format!("age must be non-negative, got {age}")));
    }
    if age > signal.failure_time {
        return Err(Error::AlreadyFailed {
            age,
            failure_time: signal.failure_time,
        });
    }
    let tol = 1e-9 * signal.dt;
    let samples: Vec<_> = signal
        .samples
        .iter()
        .copied()
        .take_while(|&(t, _)| t <= age + tol)
        .collect();
    Ok(ObservedSignal {
        type_id: signal.type_id,
        samples,
        age,
        true_residual: signal.failure_time - age,
        phi: signal.phi,
        failure_threshold: signal.failure_threshold,
        dt: signal.dt,
    })
}

/// Monte-Carlo mean lifetime over `n` signals.
pub fn mean_lifetime(params: &ComponentTypeParams, n: usize, seed: u64) -> Result<f64> {
    let signals = generate_dataset(params, n, seed)?;
    Ok(signals.iter().map(|s| s.failure_time).sum::<f64>() / n as f64)
}

/// Adjusts the mean of `ln beta` by bisection so the Monte-Carlo mean lifetime
/// matches `target`. Common random numbers keep the search monotone.
pub fn calibrate_drift(
    params: &ComponentTypeParams,
    target: f64,
    n: usize,
    seed: u64,
) -> Result<ComponentTypeParams> {
    let (a, b) = params.tau_range;
    if target <= 0.5 * (a + b) {
        return Err(Error::InvalidParameter(format!(
            "target lifetime {target} is shorter than the mean Phase-I length"
        )));
    }
    let mut p = params.clone();
    let base = params.log_beta_prior.0;
    let (mut lo, mut hi) = (base - 4.0, base + 4.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        p.log_beta_prior.0 = mid;
        // Larger drift means shorter life.
        if mean_lifetime(&p, n, seed)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    p.log_beta_prior.0 = 0.5 * (lo + hi);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ComponentTypeParams {
        ComponentTypeParams {
            type_id: 0,
            phi: 1.0,
            tau_range: (20.0, 40.0),
            log_theta_prior: (0.3f64.ln(), 0.1),
            log_beta_prior: (0.05f64.ln(), 0.1),
            bm_sigma: 0.02,
            failure_threshold: 20.0,
            dt: 1.0,
            tau_max: 500.0,
            time_cap: None,
        }
    }

    #[test]
    fn deterministic_crossing_without_noise() {
        let mut p = params();
        p.bm_sigma = 0.0;
        let beta = 0.07;
        let tau = 25.5;
        let sig = simulate_signal_with(&p, RealizedParams { tau, theta: p.phi, beta }, 3).unwrap();
        let crossing = tau + (p.failure_threshold / p.phi).ln() / beta;
        let expected = crossing.ceil();
        assert_eq!(sig.failure_time, expected);
        // log-signal exactly linear in Phase II
        for &(t, s) in sig.samples.iter().filter(|(t, _)| *t > tau) {
            let lin = p.phi.ln() + beta * (t - tau);
            assert!((s.ln() - lin).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_below_phi_is_rejected() {
        let mut p = params();
        p.failure_threshold = 0.5;
        assert!(matches!(simulate_signal(&p, 1), Err(Error::InvalidParameter(_))));
        p.failure_threshold = p.phi;
        assert!(simulate_signal(&p, 1).is_err());
    }

    #[test]
    fn signal_invariants_hold() {
        let p = params();
        for seed in 0..50 {
            let s = simulate_signal(&p, seed).unwrap();
            let (last, init) = s.samples.split_last().unwrap();
            assert!(init.iter().all(|&(_, v)| v < p.failure_threshold));
            assert!(last.1 >= p.failure_threshold);
            assert_eq!(last.0, s.failure_time);
            for (k, &(t, v)) in s.samples.iter().enumerate() {
                assert_eq!(t, k as f64 * p.dt);
                if t <= s.realized.tau {
                    assert_eq!(v, p.phi);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_signal() {
        let p = params();
        let a = generate_dataset(&p, 1, 99).unwrap();
        let b = generate_dataset(&p, 1, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&p, 1, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dataset_sizes() {
        let p = params();
        assert_eq!(generate_dataset(&p, 5, 1).unwrap().len(), 5);
        assert_eq!(generate_dataset(&p, 50, 1).unwrap().len(), 50);
        assert!(generate_dataset(&p, 0, 1).is_err());
    }

    #[test]
    fn cap_guard_fires() {
        let mut p = params();
        p.log_beta_prior = ((1e-9f64).ln(), 0.0);
        p.bm_sigma = 0.0;
        p.time_cap = Some(200.0);
        assert!(matches!(simulate_signal(&p, 0), Err(Error::NoThresholdCrossing { .. })));
    }

    #[test]
    fn truncation_edges() {
        let p = params();
        let s = simulate_signal(&p, 5).unwrap();
        let at0 = truncate_at_age(&s, 0.0).unwrap();
        assert_eq!(at0.samples, vec![(0.0, p.phi)]);
        let full = truncate_at_age(&s, s.failure_time).unwrap();
        assert_eq!(full.samples, s.samples);
        assert_eq!(full.true_residual, 0.0);
        let half = s.failure_time / 2.0;
        let pre = truncate_at_age(&s, half).unwrap();
        assert_eq!(pre.samples.len(), (half / p.dt).floor() as usize + 1);
        assert_eq!(pre.true_residual, s.failure_time - half);
        assert!(matches!(
            truncate_at_age(&s, s.failure_time + 1.0),
            Err(Error::AlreadyFailed { .. })
        ));
    }

    #[test]
    fn log_theta_moments() {
        let p = params();
        let mut rng = rng::stream(11, &[]);
        let n = 20_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| draw_realized(&p, &mut rng).unwrap().theta.ln())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let (mu, sd) = p.log_theta_prior;
        let se_mean = sd / (n as f64).sqrt();
        assert!((mean - mu).abs() < 3.0 * se_mean);
        // sd of the sample variance for a normal is sigma^2 * sqrt(2/(n-1))
        let se_var = sd * sd * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - sd * sd).abs() < 3.0 * se_var);
    }

    #[test]
    fn calibration_hits_target() {
        let p = params();
        let target = 120.0;
        let c = calibrate_drift(&p, target, 200, 4).unwrap();
        let check = mean_lifetime(&c, 1000, 12345).unwrap();
        assert!((check - target).abs() / target < 0.1, "mean {check}");
    }
}
