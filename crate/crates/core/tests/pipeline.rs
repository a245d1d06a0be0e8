mod common;

use common::{invariance_excess, rel};
use jsr_core::apps::{self, fixtures, DifferencePattern, SubdivisionScheme};
use jsr_core::lp::HullKind;
use jsr_core::pipeline::{compute_jsr, PipelineOptions};
use jsr_core::preprocess::CaseTag;
use jsr_core::{JsrError, MatrixSet, ProductWord};

fn opts() -> PipelineOptions {
    let mut o = PipelineOptions::default();
    o.engine.time_limit = Some(std::time::Duration::from_secs(60));
    o
}

#[test]
fn long_smp_family_is_exact() {
    for n in [15u32, 30, 60] {
        let set = fixtures::long_smp_family(n).unwrap();
        let r = compute_jsr(&set, &opts()).unwrap();
        let want = (1.0 / n as f64).exp();
        assert!(r.bounds.exact, "C{n}");
        assert!(rel(r.bounds.lower, want) < 1e-9 && rel(r.bounds.upper, want) < 1e-9);
        let mut w = vec![0; n as usize];
        w.push(1);
        assert!(r.bounds.words.iter().any(|x| x.canonical() == ProductWord::new(w.clone()).canonical()));
        let out = r.outcome.as_ref().unwrap();
        assert!(invariance_excess(out) <= 1.0 + 1e-9);
    }
}

#[test]
fn ex_rho0_has_jsr_two() {
    let r = compute_jsr(&fixtures::ex_rho0(), &opts()).unwrap();
    assert!(r.bounds.exact);
    assert!((r.bounds.lower - 2.0).abs() < 1e-12);
}

#[test]
fn balancing_pair_jsr() {
    let set = fixtures::balancing_pair();
    let r = compute_jsr(&set, &opts()).unwrap();
    assert!(r.bounds.exact);
    let rho = set.normalized_spectral_radius(&ProductWord::new(vec![0, 1])).unwrap();
    assert!(rel(r.bounds.lower, rho) < 1e-12);
    assert!(invariance_excess(r.outcome.as_ref().unwrap()) <= 1.0 + 1e-9);
}

#[test]
fn subdivision_example_exact() {
    let set = fixtures::subdivision_example();
    let r = compute_jsr(&set, &opts()).unwrap();
    assert!(r.bounds.exact);
    let (lo, hi) = apps::holder_from_jsr(r.bounds.lower, r.bounds.upper, -3);
    assert!((lo - 0.9413).abs() < 5e-4 && (hi - 0.9413).abs() < 5e-4, "{lo} {hi}");
}

#[test]
fn zero_set() {
    let set = MatrixSet::from_rows(2, &[&[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.0]]).unwrap();
    let r = compute_jsr(&set, &opts()).unwrap();
    assert_eq!(r.bounds.upper, 0.0);
    assert!(r.bounds.exact);
}

#[test]
fn block_triangular_set_takes_max() {
    // upper triangular: diagonal blocks are 2 and {[[1,1],[0,1]]-ish}
    let set = MatrixSet::from_rows(
        3,
        &[&[2.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 0.5], &[0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0]],
    )
    .unwrap();
    let r = compute_jsr(&set, &opts()).unwrap();
    let brute = jsr_core::gripenberg::brute_force_bounds(&set, 8, 1 << 20).unwrap();
    assert!(r.bounds.lower >= brute.lower - 1e-12);
    assert!(r.bounds.upper <= brute.upper + 1e-12);
    assert!((r.bounds.lower - 2.0).abs() < 1e-9, "{:?}", r.bounds);
}

#[test]
fn explicit_candidates() {
    let set = fixtures::subdivision_example();
    let mut o = opts();
    o.candidates = Some(vec![ProductWord::new(vec![0, 1, 1]), ProductWord::new(vec![1, 1, 2])]);
    o.engine.balancing = Some(vec![1.0, 0.9]);
    o.engine.add_extra_vertices = false;
    let r = compute_jsr(&set, &o).unwrap();
    assert!(r.bounds.exact);
    assert!(r.outcome.unwrap().iterations <= 10);
}

#[test]
fn complex_leading_is_rejected() {
    let set = MatrixSet::from_rows(2, &[&[0.0, -2.0, 2.0, 0.0]]).unwrap();
    assert!(matches!(compute_jsr(&set, &opts()), Err(JsrError::ComplexLeading)));
}

#[test]
fn capacity_rows() {
    for (p, j, d, cap) in [("pp", 4, 2, 0.5), ("op", 4, 2, 0.0), ("ppp", 16, 4, 2.0 / 3.0)] {
        let pats: Vec<DifferencePattern> = vec![p.parse().unwrap()];
        let r = apps::capacity(&pats, &opts()).unwrap();
        assert_eq!((r.count, r.dim), (j, d), "{p}");
        assert!((r.capacity.0 - cap).abs() < 1e-6 && (r.capacity.1 - cap).abs() < 1e-6, "{p} {:?}", r.capacity);
        assert_eq!(r.report.as_ref().unwrap().case, CaseTag::P);
        assert_eq!(r.report.as_ref().unwrap().kind, Some(HullKind::Cone));
    }
}

#[test]
fn capacity_longer_rows() {
    for (p, j, d, cap) in [("o+-", 4, 4, 0.6942), ("+-+-", 2, 8, 0.9468)] {
        let pats: Vec<DifferencePattern> = vec![p.parse().unwrap()];
        let r = apps::capacity(&pats, &opts()).unwrap();
        assert_eq!((r.count, r.dim), (j, d), "{p}");
        assert!((r.capacity.0 - cap).abs() < 5e-4 && (r.capacity.1 - cap).abs() < 5e-4, "{p} {:?}", r.capacity);
    }
}

#[test]
fn hat_function_regularity_is_one() {
    let s = SubdivisionScheme::parse("dilation 2\n1/2\n1\n1/2\n").unwrap();
    let r = apps::regularity(&s, 1, &opts()).unwrap();
    assert!((r.holder.0 - 1.0).abs() < 1e-10 && (r.holder.1 - 1.0).abs() < 1e-10);
}

#[test]
fn daubechies_low_orders() {
    for (n, want) in [(2, 0.55001), (3, 1.08783), (4, 1.61793)] {
        let s = apps::daubechies_scheme(n).unwrap();
        let r = apps::regularity(&s, n, &opts()).unwrap();
        assert!(r.holder.0 <= r.holder.1);
        assert!((r.holder.0 - want).abs() < 1e-3 && (r.holder.1 - want).abs() < 1e-3, "D{n} {:?}", r.holder);
    }
}

#[test]
fn scaling_equivariance() {
    let set = fixtures::balancing_pair();
    let base = compute_jsr(&set, &opts()).unwrap();
    for c in [0.25, 3.0] {
        let scaled = MatrixSet::new(set.matrices().iter().map(|m| m * c).collect()).unwrap();
        let r = compute_jsr(&scaled, &opts()).unwrap();
        assert!(rel(r.bounds.lower, c * base.bounds.lower) < 1e-10);
        assert!(rel(r.bounds.upper, c * base.bounds.upper) < 1e-10);
        let words = |b: &jsr_core::JsrBounds| b.words.iter().map(|w| w.canonical().indices).collect::<Vec<_>>();
        assert_eq!(words(&r.bounds), words(&base.bounds));
    }
}

#[test]
fn regularity_shift_under_scaling() {
    let set = fixtures::subdivision_example();
    let base = compute_jsr(&set, &opts()).unwrap();
    let c = 0.5;
    let scaled = MatrixSet::new(set.matrices().iter().map(|m| m * c).collect()).unwrap();
    let r = compute_jsr(&scaled, &opts()).unwrap();
    let (a0, _) = apps::holder_from_jsr(base.bounds.lower, base.bounds.upper, -3);
    let (a1, _) = apps::holder_from_jsr(r.bounds.lower, r.bounds.upper, -3);
    assert!((a1 - (a0 - c.ln() / 3f64.ln())).abs() < 1e-10);
}
