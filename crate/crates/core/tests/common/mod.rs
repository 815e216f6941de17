//! Independent reference implementations shared by the integration tests.
//! None of these call into the library code they check.

#![allow(dead_code)]

use drcc_cbm::dro::MaintenanceCosts;

/// `P{sum <= m}` by summing over all `2^n` outcomes.
pub fn pbinom_enumerate(ps: &[f64], m: usize) -> f64 {
    let n = ps.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > m {
            continue;
        }
        let mut p = 1.0;
        for (i, &pi) in ps.iter().enumerate() {
            p *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
        }
        total += p;
    }
    total
}

pub fn repair_cost(omega: f64, t: f64, c: &MaintenanceCosts) -> f64 {
    if omega > t {
        c.c_pr + c.v_pr * (omega - t)
    } else {
        c.c_co + c.v_co * (t - omega)
    }
}

/// Grid over `[w - delta, w + delta]` clipped to `[0, xi]`, with `steps`
/// intervals per side. Endpoints are always included.
pub fn perturbations(w: f64, delta: f64, xi: f64, steps: usize) -> Vec<f64> {
    if delta == 0.0 {
        return vec![w];
    }
    let h = delta / steps as f64;
    let lo = (w - delta).max(0.0);
    let hi = (w + delta).min(xi);
    let mut pts: Vec<f64> = (0..=2 * steps)
        .map(|i| w - delta + i as f64 * h)
        .filter(|&p| p >= lo && p <= hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts
}

/// Worst expected repair cost, maximising each sample over its grid.
pub fn psi_brute(samples: &[f64], delta: f64, xi: f64, t: usize, c: &MaintenanceCosts, steps: usize) -> f64 {
    let t = t as f64;
    samples
        .iter()
        .map(|&w| {
            perturbations(w, delta, xi, steps)
                .into_iter()
                .map(|p| repair_cost(p, t, c))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / samples.len() as f64
}

/// Worst share of samples meeting the downtime cap.
pub fn downtime_share_brute(samples: &[f64], delta: f64, xi: f64, t: usize, rho: f64, steps: usize) -> f64 {
    let t = t as f64;
    let ok = samples
        .iter()
        .filter(|&&w| {
            perturbations(w, delta, xi, steps)
                .into_iter()
                .all(|p| (t - p).max(0.0) <= rho)
        })
        .count();
    ok as f64 / samples.len() as f64
}

/// Worst failure probability by `t`.
pub fn p_bar_brute(samples: &[f64], delta: f64, xi: f64, t: usize, steps: usize) -> f64 {
    let t = t as f64;
    let hit = samples
        .iter()
        .filter(|&&w| perturbations(w, delta, xi, steps).into_iter().any(|p| p <= t))
        .count();
    hit as f64 / samples.len() as f64
}
