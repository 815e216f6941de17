mod common;

use common::*;
use drcc_cbm::degradation::{simulate_signal, truncate_at_age};
use drcc_cbm::dro::{self, pbinom_cdf, pbinom_table, AmbiguityConfig, MaintenanceCosts};
use drcc_cbm::presets;
use drcc_cbm::prognostics::EmpiricalRld;
use proptest::prelude::*;

const XI: f64 = 200.0;

fn costs() -> impl Strategy<Value = MaintenanceCosts> {
    (0.1f64..5.0, 0.0f64..1.0, 1.0f64..10.0, 0.0f64..2.0).prop_map(|(c_pr, v_pr, extra, v_co)| MaintenanceCosts {
        c_pr,
        v_pr,
        c_co: c_pr + extra,
        v_co,
    })
}

fn samples(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..60.0, 1..=max)
}

fn rld(s: &[f64]) -> EmpiricalRld {
    EmpiricalRld::from_samples(s.to_vec(), XI).unwrap()
}

proptest! {
    #[test]
    fn pbinom_matches_enumeration(ps in prop::collection::vec(0.0f64..=1.0, 0..=10), m in 0usize..12) {
        let m = m.min(ps.len());
        let got = pbinom_cdf(&ps, m);
        prop_assert!((got - pbinom_enumerate(&ps, m)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn pbinom_table_is_monotone_in_m(ps in prop::collection::vec(0.0f64..=1.0, 1..=10)) {
        let n = ps.len();
        let v = pbinom_table(&ps, n);
        for j in 0..=n {
            for k in 1..=n {
                prop_assert!(v[j][k] + 1e-15 >= v[j][k - 1]);
            }
        }
        for k in 0..=n {
            prop_assert!((v[n][k] - pbinom_cdf(&ps, k)).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_grows_with_radius_and_dominates_nominal(
        s in samples(20), c in costs(), d1 in 0.0f64..5.0, d2 in 0.0f64..5.0, t in 1usize..60,
    ) {
        let r = rld(&s);
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        let nominal = s.iter().map(|&w| repair_cost(w, t as f64, &c)).sum::<f64>() / s.len() as f64;
        prop_assert!((dro::psi(&r, 0.0, t, &c) - nominal).abs() < 1e-9);
        prop_assert!(dro::psi(&r, lo, t, &c) <= dro::psi(&r, hi, t, &c) + 1e-9);
    }

    #[test]
    fn p_bar_and_u_are_monotone(
        s in samples(20), d1 in 0.0f64..5.0, d2 in 0.0f64..5.0, t in 1usize..60, rho in 0.0f64..10.0, eps in 0.01f64..0.5,
    ) {
        let r = rld(&s);
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        prop_assert!(dro::p_bar(&r, lo, t) <= dro::p_bar(&r, hi, t));
        prop_assert!(dro::p_bar(&r, lo, t) <= dro::p_bar(&r, lo, t + 1));
        // u switches off as t or the radius grows
        prop_assert!(!dro::u(&r, lo, t + 1, rho, eps) || dro::u(&r, lo, t, rho, eps));
        prop_assert!(!dro::u(&r, hi, t, rho, eps) || dro::u(&r, lo, t, rho, eps));
    }

    #[test]
    fn t_star_matches_linear_scan(
        s in samples(20), d in 0.0f64..5.0, rho in 0.0f64..10.0, eps in 0.01f64..0.5, tm in 1usize..80,
    ) {
        let r = rld(&s);
        let scan = (1..=tm).find(|&t| !dro::u(&r, d, t, rho, eps)).unwrap_or(tm + 1);
        prop_assert_eq!(dro::t_star(&r, d, rho, eps, tm), scan);
    }

    #[test]
    fn closed_forms_match_per_sample_search(
        s in samples(4), c in costs(), k in 0u32..=20, t in 1usize..70, rho in 0.0f64..8.0, eps in 0.01f64..0.6,
    ) {
        let d = 0.25 * k as f64;
        let r = rld(&s);
        let steps = 200;
        let brute = psi_brute(&s, d, XI, t, &c, steps);
        let closed = dro::psi(&r, d, t, &c);
        prop_assert!(brute <= closed + 1e-9);
        prop_assert!(closed - brute <= c.v_pr.max(c.v_co) * d / steps as f64 + 1e-9);
        prop_assert!((dro::p_bar(&r, d, t) - p_bar_brute(&s, d, XI, t, steps)).abs() < 1e-12);
        let share = downtime_share_brute(&s, d, XI, t, rho, steps);
        prop_assert_eq!(dro::u(&r, d, t, rho, eps), share >= 1.0 - eps - 1e-9);
    }

    #[test]
    fn precompute_scales_radius_by_sample_spread(s in samples(20), d in 0.0f64..2.0) {
        let r = rld(&s);
        let c = presets::turbine_costs();
        let p = dro::precompute(&[r.clone()], &[c], AmbiguityConfig::new(d).unwrap(), 5.0, 0.1, 30).unwrap();
        let abs = d * r.sigma_hat;
        for t in 1..=30 {
            prop_assert_eq!(p.psi[0][t - 1], dro::psi(&r, abs, t, &c));
            prop_assert_eq!(p.p_bar[0][t - 1], dro::p_bar(&r, abs, t));
        }
        prop_assert_eq!(p.t_star[0], dro::t_star(&r, abs, 5.0, 0.1, 30));
    }

    #[test]
    fn signals_cross_threshold_once_at_the_end(l in 0usize..3, seed in any::<u64>()) {
        let p = &presets::component_types()[l];
        let sig = simulate_signal(p, seed).unwrap();
        prop_assert_eq!(&sig, &simulate_signal(p, seed).unwrap());
        let n = sig.samples.len();
        for (i, &(t, s)) in sig.samples.iter().enumerate() {
            prop_assert!((t - i as f64 * p.dt).abs() < 1e-9);
            prop_assert!(s > 0.0);
            if t <= sig.realized.tau {
                prop_assert_eq!(s, p.phi);
            }
            if i + 1 < n {
                prop_assert!(s < p.failure_threshold);
            }
        }
        prop_assert!(sig.samples[n - 1].1 >= p.failure_threshold);
        prop_assert_eq!(sig.failure_time, sig.samples[n - 1].0);
    }

    #[test]
    fn truncation_keeps_prefix_and_residual(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let p = &presets::component_types()[0];
        let sig = simulate_signal(p, seed).unwrap();
        let age = (frac * sig.failure_time).floor();
        let obs = truncate_at_age(&sig, age).unwrap();
        prop_assert_eq!(obs.samples.as_slice(), &sig.samples[..obs.samples.len()]);
        prop_assert!(obs.samples.iter().all(|&(t, _)| t <= age));
        prop_assert_eq!(obs.samples.len(), age as usize + 1);
        prop_assert!((obs.true_residual - (sig.failure_time - age)).abs() < 1e-12);
    }
}
