use std::time::Duration;

use drcc_cbm::baselines::{self, plan, BaselineKind};
use drcc_cbm::dro::check_z2_probability;
use drcc_cbm::harness::{self, run_episode, training_priors, EpisodeConfig};
use drcc_cbm::milp::{default_backend, SolveOptions};
use drcc_cbm::model::{build_milp, cost_breakdown, solve, verify_solution, Variant, Z2Mode};
use drcc_cbm::presets::{self, regression_instance};

fn opts() -> SolveOptions {
    SolveOptions {
        time_limit: Duration::from_secs(120),
        mip_gap: 1e-6,
        seed: 0,
        threads: 1,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(1.0)
}

#[test]
fn joint_plans_verify_and_match_cost_breakdown() {
    let s = default_backend().unwrap();
    for seed in 0..4 {
        let (inst, rlds) = regression_instance(2, 80, seed).unwrap();
        for kind in [BaselineKind::Saa, BaselineKind::Drcc { delta: 0.2 }] {
            let p = plan(kind, &inst, &rlds, Z2Mode::Exact, s.as_ref(), &opts()).unwrap();
            let rep = verify_solution(&inst, &p.params, &p.solution);
            assert!(rep.passed(), "{kind} seed {seed}: {:?}", rep.violations);
            assert_eq!(rep.z2_exact_feasible, Some(true));
            assert!(close(p.objective(), p.solution.objective.unwrap()));
            for (j, e) in p.repair_epochs().iter().enumerate() {
                assert!(e.unwrap() < p.params.t_star[j]);
            }
        }
    }
}

#[test]
fn sequential_never_beats_joint() {
    let s = default_backend().unwrap();
    for seed in 0..4 {
        let (inst, rlds) = regression_instance(2, 80, 10 + seed).unwrap();
        let joint = plan(BaselineKind::Drcc { delta: 0.1 }, &inst, &rlds, Z2Mode::Exact, s.as_ref(), &opts()).unwrap();
        let seq = plan(BaselineKind::Sequential { delta: 0.1 }, &inst, &rlds, Z2Mode::Exact, s.as_ref(), &opts()).unwrap();
        assert!(joint.objective() <= seq.objective() + 1e-6, "seed {seed}");
        // the two stages agree on repairs, and the inventory stage is feasible for them
        let stage2 = seq.inventory_stage.as_ref().unwrap();
        assert_eq!(stage2.repair_epochs, seq.solution.repair_epochs);
        let rep = verify_solution(&inst, &seq.params, stage2);
        assert!(rep.passed(), "{:?}", rep.violations);
        // the maintenance stage alone is a lower bound on the joint maintenance side
        assert!(seq.planned_cost.maintenance_side() <= joint.planned_cost.maintenance_side() + 1e-6);
    }
}

#[test]
fn robust_repairs_before_the_worst_case_deadline() {
    let s = default_backend().unwrap();
    let (inst, rlds) = regression_instance(2, 80, 21).unwrap();
    let p = plan(BaselineKind::Robust { delta: 0.0 }, &inst, &rlds, Z2Mode::Exact, s.as_ref(), &opts()).unwrap();
    let late = p
        .repair_epochs()
        .iter()
        .zip(&rlds)
        .filter(|(e, r)| e.unwrap() as f64 >= r.min())
        .count();
    assert!(late <= inst.gamma);
    for (e, r) in p.repair_epochs().iter().zip(&rlds) {
        assert!(e.unwrap() as f64 <= r.min() + inst.rho);
    }
}

#[test]
fn sample_based_schedules_are_reported_against_the_exact_constraint() {
    let s = default_backend().unwrap();
    let (inst, rlds) = regression_instance(2, 80, 13).unwrap();
    let params = baselines::drcc_params(&inst, &rlds, 0.1).unwrap();
    let exact = solve(&build_milp(&inst, &params, Z2Mode::Exact, &Variant::Joint).unwrap(), s.as_ref(), &opts()).unwrap();
    let z2 = Z2Mode::SampleBased { samples: 100, seed: 3 };
    let built = build_milp(&inst, &params, z2, &Variant::Joint).unwrap();
    assert_eq!(built.size().binary, exact.size.binary + 100);
    let sol = solve(&built, s.as_ref(), &opts()).unwrap();
    let rep = verify_solution(&inst, &params, &sol);
    assert!(rep.passed(), "{:?}", rep.violations);
    let (prob, ok) = check_z2_probability(&sol.repair_epochs, &params.p_bar, inst.gamma, inst.beta).unwrap();
    assert_eq!(rep.z2_probability, Some(prob));
    assert_eq!(rep.z2_exact_feasible, Some(ok));
    assert!(sol.scenario_violations.iter().filter(|&&v| v).count() <= 10);
    // without the constraint the problem is a relaxation of both
    let off = solve(&build_milp(&inst, &params, Z2Mode::Off, &Variant::Joint).unwrap(), s.as_ref(), &opts()).unwrap();
    assert!(off.objective.unwrap() <= sol.objective.unwrap() + 1e-6);
    assert!(off.objective.unwrap() <= exact.objective.unwrap() + 1e-6);
}

#[test]
fn inventory_stage_prices_fixed_repairs() {
    let s = default_backend().unwrap();
    let (inst, rlds) = regression_instance(1, 60, 4).unwrap();
    let params = baselines::drcc_params(&inst, &rlds, 0.0).unwrap();
    let joint = solve(&build_milp(&inst, &params, Z2Mode::Exact, &Variant::Joint).unwrap(), s.as_ref(), &opts()).unwrap();
    let epochs: Vec<usize> = joint.repair_epochs.iter().map(|e| e.unwrap()).collect();
    let inv = solve(
        &build_milp(&inst, &params, Z2Mode::Off, &Variant::InventoryOnly { repair_epochs: epochs }).unwrap(),
        s.as_ref(),
        &opts(),
    )
    .unwrap();
    let j = cost_breakdown(&inst, &params, &joint);
    let i = cost_breakdown(&inst, &params, &inv);
    assert!(close(i.inventory_side(), j.inventory_side()));
    assert!(close(i.inventory_side(), inv.objective.unwrap()));
    for (l, row) in inv.h.iter().enumerate() {
        assert!(row.iter().all(|&h| h >= 0), "type {l}");
    }
}

#[test]
fn short_episode_is_consistent_and_replays() {
    let mut cfg = EpisodeConfig::new(
        presets::wind_farm(2),
        presets::component_types(),
        BaselineKind::Drcc { delta: 0.1 },
        60,
    );
    cfg.solve = opts();
    let priors = training_priors(&cfg.types, 10, 3).unwrap();
    let ep = run_episode(&cfg, &priors, 3).unwrap();
    assert!(ep.integrity_ok());
    assert_eq!(ep.solves, 3);
    assert_eq!(ep, run_episode(&cfg, &priors, 3).unwrap());
    let k = &ep.kpis;
    assert_eq!(k.preventive + k.corrective, ep.repairs.len());
    assert!(close(k.cost_per_day, ep.ledger.total_currency() / 60.0));
    if let Some(v) = k.avg_cc_violation {
        assert!((0.0..=1.0).contains(&v));
    }
    let report = harness::compute_kpis(std::slice::from_ref(&ep)).unwrap();
    assert_eq!(report.cost_per_day.n, 1);
}
