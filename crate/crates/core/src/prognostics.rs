//! Remaining-life prognostics on the log-signal.
//!
//! In Phase II the log-signal is a Brownian motion with drift. Training
//! signals give a normal prior on the drift and a plug-in volatility. Observed
//! log-increments update the drift conjugately, and the first passage of the
//! remaining log-distance to the threshold is Inverse Gaussian:
//! `nu = r / drift`, `shape = r^2 / sigma^2`.

use log::warn;
use rand_distr::{Distribution, InverseGaussian, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::degradation::{is_degradation_sample, DegradationSignal, ObservedSignal};
use crate::rng;
use crate::{Error, Result};

/// Relative floor applied to fitted variances.
pub const VARIANCE_FLOOR: f64 = 1e-8;
/// Smallest volatility estimate handed to the Inverse Gaussian.
pub const MIN_SIGMA: f64 = 1e-9;
/// Default number of remaining-life samples per component.
pub const DEFAULT_RLD_SAMPLES: usize = 200;
/// Support bound as a multiple of the longest training lifetime.
pub const TAU_MAX_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub type_id: usize,
    /// Normal `(mean, variance)` prior on the Phase-II log drift.
    pub drift_prior: (f64, f64),
    pub bm_sigma_hat: f64,
    /// Observed range of Phase-I lengths.
    pub phase1_stats: (f64, f64),
    /// `(mean, variance)` of the fitted log-intercepts.
    pub log_theta_stats: (f64, f64),
    pub phi: f64,
    pub failure_threshold: f64,
    pub dt: f64,
    pub tau_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RldPosterior {
    pub nu: f64,
    pub gamma_shape: f64,
    pub tau_max: f64,
    pub drift_mean: f64,
    pub drift_var: f64,
}

impl RldPosterior {
    pub fn mean(&self) -> f64 {
        self.nu
    }

    pub fn variance(&self) -> f64 {
        self.nu.powi(3) / self.gamma_shape
    }
}

/// Empirical remaining-life distribution: the centre of the ambiguity ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRld {
    pub samples: Vec<f64>,
    pub sigma_hat: f64,
    pub tau_max: f64,
}

impl EmpiricalRld {
    /// Builds an RLD from raw samples, clipping into `[0, tau_max]`.
    pub fn from_samples(samples: Vec<f64>, tau_max: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empirical RLD needs at least one sample".into()));
        }
        if !(tau_max > 0.0) {
            return Err(Error::InvalidParameter("tau_max must be positive".into()));
        }
        let samples: Vec<f64> = samples.into_iter().map(|w| w.clamp(0.0, tau_max)).collect();
        let sigma_hat = sample_sd(&samples);
        Ok(EmpiricalRld {
            samples,
            sigma_hat,
            tau_max,
        })
    }

    /// A component that has already failed: all mass at zero.
    pub fn failed(n: usize, tau_max: f64) -> Self {
        EmpiricalRld {
            samples: vec![0.0; n.max(1)],
            sigma_hat: 0.0,
            tau_max,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

struct PhaseTwoFit {
    tau_hat: f64,
    slope: f64,
    intercept: f64,
    sq_resid: f64,
    n_increments: usize,
}

/// Ordinary least squares of `ln S` on `t - tau_hat` over the Phase-II samples.
fn fit_phase_two(samples: &[(f64, f64)], phi: f64) -> Option<PhaseTwoFit> {
    let first = samples
        .iter()
        .position(|&(_, s)| is_degradation_sample(s, phi))?;
    let tau_hat = if first == 0 { 0.0 } else { samples[first - 1].0 };
    let pts: Vec<(f64, f64)> = samples[first..]
        .iter()
        .map(|&(t, s)| (t - tau_hat, s.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sq_resid = 0.0;
    for w in pts.windows(2) {
        let step = w[1].0 - w[0].0;
        let d = (w[1].1 - w[0].1) - slope * step;
        sq_resid += d * d / step;
    }
    Some(PhaseTwoFit {
        tau_hat,
        slope,
        intercept,
        sq_resid,
        n_increments: pts.len() - 1,
    })
}

/// Fits drift, volatility, and Phase-I priors from complete training signals.
pub fn fit_priors(training: &[DegradationSignal]) -> Result<Priors> {
    if training.len() < 2 {
        return Err(Error::InsufficientTraining(format!(
            "need at least 2 training signals, got {}",
            training.len()
        )));
    }
    let first = &training[0];
    if let Some(s) = training.iter().find(|s| s.type_id != first.type_id) {
        return Err(Error::InvalidParameter(format!(
            "mixed component types {} and {} in training set",
            first.type_id, s.type_id
        )));
    }
    let mut slopes = Vec::new();
    let mut intercepts = Vec::new();
    let mut taus = Vec::new();
    let (mut sq, mut incs) = (0.0, 0usize);
    for (i, sig) in training.iter().enumerate() {
        match fit_phase_two(&sig.samples, sig.phi) {
            Some(fit) => {
                slopes.push(fit.slope);
                intercepts.push(fit.intercept);
                taus.push(fit.tau_hat);
                sq += fit.sq_resid;
                incs += fit.n_increments;
            }
            None => warn!("training signal {i} has fewer than 3 Phase-II samples; skipped"),
        }
    }
    if slopes.is_empty() {
        return Err(Error::InsufficientTraining(
            "no training signal has 3 or more Phase-II samples".into(),
        ));
    }
    let (dm, dv) = mean_var(&slopes);
    let (tm, tv) = mean_var(&intercepts);
    let sigma2 = sq / incs as f64;
    let longest = training
        .iter()
        .map(|s| s.failure_time)
        .fold(0.0, f64::max);
    Ok(Priors {
        type_id: first.type_id,
        drift_prior: (dm, dv.max(VARIANCE_FLOOR * dm * dm).max(f64::MIN_POSITIVE)),
        bm_sigma_hat: sigma2.sqrt().max(MIN_SIGMA),
        phase1_stats: (
            taus.iter().copied().fold(f64::INFINITY, f64::min),
            taus.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
        log_theta_stats: (tm, tv.max(VARIANCE_FLOOR * tm * tm).max(f64::MIN_POSITIVE)),
        phi: first.phi,
        failure_threshold: first.failure_threshold,
        dt: first.dt,
        tau_max: TAU_MAX_FACTOR * longest,
    })
}

/// Conjugate normal update of the drift from the observed Phase-II
/// log-increments, mapped to the Inverse-Gaussian first-passage law.
pub fn update_posterior(priors: &Priors, observed: &ObservedSignal) -> Result<RldPosterior> {
    let phase2: Vec<(f64, f64)> = observed.degradation_samples().copied().collect();
    let Some(&(_, s_now)) = phase2.last() else {
        return Err(Error::NoDegradationPhase);
    };
    let r = priors.failure_threshold.ln() - s_now.ln();
    if r <= 0.0 {
        return Err(Error::AtThreshold);
    }
    let sigma2 = priors.bm_sigma_hat.powi(2);
    let (m0, v0) = priors.drift_prior;
    let mut precision = 1.0 / v0;
    let mut weighted = m0 / v0;
    for w in phase2.windows(2) {
        let step = w[1].0 - w[0].0;
        precision += step / sigma2;
        weighted += (w[1].1.ln() - w[0].1.ln()) / sigma2;
    }
    let drift_var = 1.0 / precision;
    let mut drift_mean = weighted * drift_var;
    if drift_mean <= 0.0 {
        warn!("posterior drift {drift_mean} is not positive; falling back to the prior mean");
        drift_mean = m0;
    }
    if drift_mean <= 0.0 {
        return Err(Error::InvalidParameter("prior drift mean is not positive".into()));
    }
    Ok(RldPosterior {
        nu: r / drift_mean,
        gamma_shape: r * r / sigma2,
        tau_max: priors.tau_max,
        drift_mean,
        drift_var,
    })
}

/// `n` i.i.d. Inverse-Gaussian draws clipped into `[0, tau_max]`.
pub fn sample_rld(posterior: &RldPosterior, n: usize, seed: u64) -> Result<EmpiricalRld> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one RLD sample".into()));
    }
    let ig = InverseGaussian::new(posterior.nu, posterior.gamma_shape)
        .map_err(|e| Error::InvalidParameter(format!("inverse gaussian: {e}")))?;
    let mut rng = rng::stream(seed, &[]);
    let draws = (0..n).map(|_| ig.sample(&mut rng)).collect();
    EmpiricalRld::from_samples(draws, posterior.tau_max)
}

/// RLD for a component still in Phase I: the remaining Phase-I time is drawn
/// from the fitted range conditioned on the current age, followed by a
/// first passage from a prior draw of the initial level with a prior drift.
pub fn sample_prior_predictive(
    priors: &Priors,
    age: f64,
    n: usize,
    seed: u64,
) -> Result<EmpiricalRld> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one RLD sample".into()));
    }
    let mut rng = rng::stream(seed, &[]);
    let (a, b) = priors.phase1_stats;
    let lo = a.max(age);
    let drift = Normal::new(priors.drift_prior.0, priors.drift_prior.1.sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let log_theta = Normal::new(priors.log_theta_stats.0, priors.log_theta_stats.1.sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let sigma2 = priors.bm_sigma_hat.powi(2);
    let ln_threshold = priors.failure_threshold.ln();
    let mut draws = Vec::with_capacity(n);
    while draws.len() < n {
        let tau = if b > lo {
            Uniform::new(lo, b)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(&mut rng)
        } else {
            lo
        };
        let d = drift.sample(&mut rng);
        if d <= 0.0 {
            continue;
        }
        let r = (ln_threshold - log_theta.sample(&mut rng)).max(0.0);
        let first_passage = if r == 0.0 {
            0.0
        } else {
            InverseGaussian::new(r / d, r * r / sigma2)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(&mut rng)
        };
        draws.push(tau - age + first_passage);
    }
    EmpiricalRld::from_samples(draws, priors.tau_max)
}

/// Dispatches to the posterior RLD when Phase II has been observed and to the
/// prior-predictive RLD otherwise.
pub fn predict_rld(
    priors: &Priors,
    observed: &ObservedSignal,
    n: usize,
    seed: u64,
) -> Result<EmpiricalRld> {
    if observed.degradation_samples().next().is_none() {
        return sample_prior_predictive(priors, observed.age, n, seed);
    }
    let post = update_posterior(priors, observed)?;
    sample_rld(&post, n, seed)
}

/// Sample quantile by linear interpolation, `q` in `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::{
        generate_dataset, simulate_signal_with, truncate_at_age, ComponentTypeParams,
        RealizedParams,
    };

    fn params() -> ComponentTypeParams {
        ComponentTypeParams {
            type_id: 1,
            phi: 1.0,
            tau_range: (30.0, 60.0),
            log_theta_prior: (1.5f64.ln(), 0.1),
            log_beta_prior: (0.04f64.ln(), 0.1),
            bm_sigma: 0.03,
            failure_threshold: 20.0,
            dt: 1.0,
            tau_max: 1000.0,
            time_cap: None,
        }
    }

    fn priors() -> Priors {
        Priors {
            type_id: 1,
            drift_prior: (0.04, 1e-5),
            bm_sigma_hat: 0.03,
            phase1_stats: (30.0, 60.0),
            log_theta_stats: (1.5f64.ln(), 0.01),
            phi: 1.0,
            failure_threshold: 20.0,
            dt: 1.0,
            tau_max: 1000.0,
        }
    }

    #[test]
    fn empty_training_is_error() {
        assert!(matches!(fit_priors(&[]), Err(Error::InsufficientTraining(_))));
    }

    #[test]
    fn identical_noiseless_signals_hit_variance_floor() {
        let mut p = params();
        p.bm_sigma = 0.0;
        let beta = 0.05;
        let sigs: Vec<_> = [33.5, 47.25]
            .iter()
            .enumerate()
            .map(|(i, &tau)| {
                simulate_signal_with(&p, RealizedParams { tau, theta: 1.5, beta }, i as u64).unwrap()
            })
            .collect();
        let pr = fit_priors(&sigs).unwrap();
        assert!((pr.drift_prior.0 - beta).abs() < 1e-9);
        assert_eq!(pr.drift_prior.1, VARIANCE_FLOOR * pr.drift_prior.0.powi(2));
        assert_eq!(pr.bm_sigma_hat, MIN_SIGMA);
    }

    #[test]
    fn drift_prior_matches_generator_moments() {
        let p = params();
        let sigs = generate_dataset(&p, 50, 21).unwrap();
        let pr = fit_priors(&sigs).unwrap();
        let (mu, sd) = p.log_beta_prior;
        let expected = (mu + sd * sd / 2.0).exp();
        let se = (pr.drift_prior.1 / 50.0).sqrt();
        assert!(
            (pr.drift_prior.0 - expected).abs() < 3.0 * se,
            "mean {} expected {} se {}",
            pr.drift_prior.0,
            expected,
            se
        );
        assert!((pr.bm_sigma_hat - p.bm_sigma).abs() / p.bm_sigma < 0.1);
    }

    #[test]
    fn phase_one_prefix_is_rejected() {
        let p = params();
        let sig = generate_dataset(&p, 1, 3).unwrap().remove(0);
        let prefix = truncate_at_age(&sig, 0.0).unwrap();
        assert!(matches!(
            update_posterior(&priors(), &prefix),
            Err(Error::NoDegradationPhase)
        ));
    }

    #[test]
    fn posterior_contracts_and_tracks_slope() {
        let pr = priors();
        let slope = 0.06;
        let mk = |n: usize| ObservedSignal {
            type_id: 1,
            samples: (0..=n)
                .map(|k| {
                    let t = 10.0 + k as f64;
                    (t, 1.5 * (slope * k as f64).exp())
                })
                .collect(),
            age: 10.0 + n as f64,
            true_residual: 0.0,
            phi: 1.0,
            failure_threshold: 20.0,
            dt: 1.0,
        };
        let mut prev_gap = f64::INFINITY;
        for n in [1usize, 5, 20, 40] {
            let obs = mk(n);
            let post = update_posterior(&pr, &obs).unwrap();
            assert!(post.drift_var <= pr.drift_prior.1);
            let r = 20f64.ln() - obs.last_value().ln();
            let gap = (post.nu - r / slope).abs();
            assert!(gap < prev_gap, "n={n}: gap {gap} not below {prev_gap}");
            prev_gap = gap;
        }
    }

    #[test]
    fn noiseless_limit_concentrates() {
        let mut pr = priors();
        pr.bm_sigma_hat = 1e-7;
        let obs = ObservedSignal {
            type_id: 1,
            samples: vec![(40.0, 1.0), (41.0, 2.0)],
            age: 41.0,
            true_residual: 0.0,
            phi: 1.0,
            failure_threshold: 20.0,
            dt: 1.0,
        };
        let post = update_posterior(&pr, &obs).unwrap();
        let rld = sample_rld(&post, 500, 1).unwrap();
        for w in &rld.samples {
            assert!((w - post.nu).abs() / post.nu < 1e-4);
        }
    }

    #[test]
    fn at_threshold_is_error() {
        let obs = ObservedSignal {
            type_id: 1,
            samples: vec![(40.0, 1.0), (41.0, 25.0)],
            age: 41.0,
            true_residual: 0.0,
            phi: 1.0,
            failure_threshold: 20.0,
            dt: 1.0,
        };
        assert!(matches!(update_posterior(&priors(), &obs), Err(Error::AtThreshold)));
    }

    fn post(nu: f64, shape: f64, tau_max: f64) -> RldPosterior {
        RldPosterior {
            nu,
            gamma_shape: shape,
            tau_max,
            drift_mean: 1.0,
            drift_var: 1.0,
        }
    }

    #[test]
    fn single_sample_in_support() {
        let r = sample_rld(&post(10.0, 5.0, 12.0), 1, 8).unwrap();
        assert_eq!(r.len(), 1);
        assert!((0.0..=12.0).contains(&r.samples[0]));
        assert_eq!(r.sigma_hat, 0.0);
    }

    #[test]
    fn huge_shape_degenerates_to_mean() {
        let r = sample_rld(&post(10.0, 1e14, 100.0), 200, 2).unwrap();
        assert!(r.samples.iter().all(|w| (w - 10.0).abs() < 1e-4));
    }

    #[test]
    fn inverse_gaussian_moments() {
        // mean nu, variance nu^3 / shape = 25
        let r = sample_rld(&post(10.0, 40.0, 1e9), 100_000, 77).unwrap();
        let (m, v) = mean_var(&r.samples);
        assert!((m - 10.0).abs() / 10.0 < 0.01, "mean {m}");
        assert!((v - 25.0).abs() / 25.0 < 0.05, "var {v}");
    }

    #[test]
    fn prior_predictive_respects_age() {
        let pr = priors();
        let rld = sample_prior_predictive(&pr, 50.0, 300, 5).unwrap();
        assert!(rld.samples.iter().all(|&w| w >= 0.0 && w <= pr.tau_max));
        let young = sample_prior_predictive(&pr, 0.0, 300, 5).unwrap();
        let mean = |r: &EmpiricalRld| r.samples.iter().sum::<f64>() / r.len() as f64;
        assert!(mean(&young) > mean(&rld));
    }
}
