mod common;

use common::{invariance_excess, random_pair, rel, rng};
use jsr_core::apps::fixtures;
use jsr_core::lp::HullKind;
use jsr_core::pipeline::{compute_jsr, PipelineOptions};
use jsr_core::polytope::{
    compute_balancing, compute_q, run, Balancing, BalancingProblem, Candidate, CandidateSet, EngineOptions, Role,
    Termination,
};
use jsr_core::{JsrError, MatrixSet, ProductWord};

fn c_word(n: usize) -> ProductWord {
    let mut w = vec![0; n];
    w.push(1);
    ProductWord::new(w)
}

#[test]
fn every_iteration_brackets_the_known_value() {
    for n in [15usize, 30] {
        let set = fixtures::long_smp_family(n as u32).unwrap();
        let truth = (1.0 / n as f64).exp();
        let cs = CandidateSet::from_words(&set, &[c_word(n)], &[]).unwrap();
        let out = run(&set, &cs, HullKind::Symmetrized, &EngineOptions::default()).unwrap();
        assert_eq!(out.termination, Termination::Converged);
        let mut prev = f64::INFINITY;
        for row in &out.trace {
            assert!(row.lower <= truth + 1e-12 && truth <= row.upper + 1e-9, "{row:?}");
            assert!(row.b >= 1.0 && row.b <= prev);
            prev = row.b;
        }
        assert!(invariance_excess(&out) <= 1.0 + 1e-9);
    }
}

#[test]
fn subdivision_trace_brackets_holder_value() {
    let set = fixtures::subdivision_example();
    let truth = 3f64.powf(-0.941_3);
    let r = compute_jsr(&set, &PipelineOptions::default()).unwrap();
    let out = r.outcome.unwrap();
    for row in &out.trace {
        // 0.9413 is rounded, so allow the matching slack in the exponent
        assert!(row.lower <= truth * 1.001 && truth <= row.upper * 1.001, "{row:?}");
    }
}

#[test]
fn manual_balancing_on_subdivision_example() {
    let set = fixtures::subdivision_example();
    let cs = CandidateSet::from_words(&set, &[ProductWord::new(vec![0, 1, 1]), ProductWord::new(vec![1, 1, 2])], &[])
        .unwrap();
    let mut o = EngineOptions { balancing: Some(vec![1.0, 0.9]), add_extra_vertices: false, ..Default::default() };
    let out = run(&set, &cs, HullKind::Symmetrized, &o).unwrap();
    assert_eq!(out.termination, Termination::Converged);
    assert!(out.iterations <= 10);
    assert!(invariance_excess(&out) <= 1.0 + 1e-9);
    // equal factors keep growing
    o.balancing = Some(vec![1.0, 1.0]);
    o.max_iterations = 15;
    let out = run(&set, &cs, HullKind::Symmetrized, &o).unwrap();
    assert_ne!(out.termination, Termination::Converged);
}

fn nearly_problem(role: Role) -> BalancingProblem {
    let set = fixtures::balancing_pair();
    let mats = set.matrices().to_vec();
    let smp = Candidate::new(&mats, ProductWord::new(vec![1, 0])).unwrap();
    let other = Candidate::new(&mats, ProductWord::new(vec![1])).unwrap();
    let unit: Vec<_> = mats.iter().map(|a| a / smp.rho).collect();
    let trees = vec![smp.roots(&mats).unwrap(), other.roots(&mats).unwrap()];
    let duals = vec![smp.dual.clone(), other.dual.clone()];
    let q = compute_q(&unit, &trees, &duals, 10);
    let targets = vec![0.0, 0.999 * other.rho / smp.rho];
    BalancingProblem { q, roles: vec![Role::Smp, role], horizon: 10, targets }
}

#[test]
fn balancing_pair_q_values() {
    let p = nearly_problem(Role::Smp);
    assert!((p.q[(0, 1)] - 2.0395).abs() < 1e-3, "{}", p.q);
    assert!((p.q[(1, 0)] - 0.8196).abs() < 1e-3, "{}", p.q);
    assert_eq!(compute_balancing(&p), Balancing::Infeasible);
    assert!(matches!(compute_balancing(&nearly_problem(Role::Nearly)), Balancing::Factors(_)));
}

#[test]
fn delta_mode_interval_ratio() {
    let mut r = rng(11);
    let mut done = 0;
    while done < 5 {
        let set = random_pair(&mut r, 4);
        let mut o = PipelineOptions::default();
        o.engine.delta = 0.97;
        match compute_jsr(&set, &o) {
            Err(JsrError::ComplexLeading) => continue,
            Ok(rep) => {
                let out = rep.outcome.as_ref().unwrap();
                assert_eq!(out.termination, Termination::Converged);
                assert!(rep.bounds.upper / rep.bounds.lower <= 1.0 / 0.97 + 1e-9);
                done += 1;
            }
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn random_pairs_are_certified() {
    let mut r = rng(5);
    let mut done = 0;
    while done < 10 {
        let set = random_pair(&mut r, 3);
        let rep = match compute_jsr(&set, &PipelineOptions::default()) {
            Err(JsrError::ComplexLeading) => continue,
            res => res.unwrap(),
        };
        done += 1;
        let out = rep.outcome.as_ref().unwrap();
        for row in &out.trace {
            assert!(row.lower <= row.upper);
        }
        if rep.bounds.exact {
            assert!(invariance_excess(out) <= 1.0 + 1e-9);
            let brute = jsr_core::gripenberg::brute_force_bounds(&set, 5, 1 << 10).unwrap();
            assert!(brute.lower <= rep.bounds.lower * (1.0 + 1e-10) && rep.bounds.upper <= brute.upper * (1.0 + 1e-10));
        }
    }
}

#[test]
fn restart_finds_better_candidate() {
    // start from a deliberately poor candidate: the engine must notice
    let set = fixtures::long_smp_family(5).unwrap();
    let o = PipelineOptions { candidates: Some(vec![ProductWord::new(vec![0, 0, 1])]), ..Default::default() };
    let rep = compute_jsr(&set, &o).unwrap();
    assert!(rep.restarts >= 1);
    assert!(rel(rep.bounds.lower, (0.2f64).exp()) < 1e-9, "{:?}", rep.bounds);
}

#[test]
fn root_recursion_on_fixtures() {
    for name in ["C15", "E", "subdiv-example", "ex_rho"] {
        let set: MatrixSet = fixtures::fixture(name).unwrap();
        let rep = compute_jsr(&set, &PipelineOptions::default()).unwrap();
        // words of a split set live on a block
        if !rep.blocks.is_empty() {
            continue;
        }
        let mats = set.scaled_matrices();
        for w in &rep.bounds.words {
            let Ok(c) = Candidate::new(&mats, w.clone()) else { continue };
            let Ok(roots) = c.roots(&mats) else { continue };
            let last = *c.word.indices.last().unwrap();
            let back = &mats[last] * roots.last().unwrap() / c.rho;
            assert!((back - &roots[0]).amax() <= 1e-10 * roots[0].amax(), "{name}");
        }
    }
}
