#![allow(dead_code)]

use jsr_core::lp::HullKind;
use jsr_core::matrixset::leading_eigenpair;
use jsr_core::norms::{minkowski_norm, PolytopeVertices};
use jsr_core::polytope::EngineOutcome;
use jsr_core::MatrixSet;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two uniform `[-1, 1]` matrices, each divided by its spectral radius.
pub fn random_pair(rng: &mut ChaCha8Rng, s: usize) -> MatrixSet {
    let mats: Vec<DMatrix<f64>> = (0..2)
        .map(|_| {
            let m = DMatrix::from_fn(s, s, |_, _| rng.random_range(-1.0..1.0));
            m.clone() / jsr_core::linalg::spectral_radius(&m).unwrap()
        })
        .collect();
    MatrixSet::new(mats).unwrap()
}

pub fn random_vectors(rng: &mut ChaCha8Rng, s: usize, m: usize, nonneg: bool) -> Vec<DVector<f64>> {
    (0..m)
        .map(|_| DVector::from_fn(s, |_, _| if nonneg { rng.random_range(0.0..1.0) } else { rng.random_range(-1.0..1.0) }))
        .collect()
}

/// `sup <a, x>` over the dual polyhedron, by enumerating its vertices:
/// every choice of `s` active constraints is solved and kept if feasible.
/// Symmetrized: `|<a, v>| <= 1`. Cone: `<a, v> <= 1`, `a >= 0`.
pub fn facet_oracle(kind: HullKind, vs: &[DVector<f64>], x: &DVector<f64>) -> f64 {
    let s = x.len();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for v in vs {
        rows.push((v.clone(), 1.0));
        if kind == HullKind::Symmetrized {
            rows.push((-v, 1.0));
        }
    }
    if kind == HullKind::Cone {
        for l in 0..s {
            rows.push((-DVector::from_fn(s, |r, _| if r == l { 1.0 } else { 0.0 }), 0.0));
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        let m = DMatrix::from_fn(s, s, |i, j| rows[idx[i]].0[j]);
        let rhs = DVector::from_fn(s, |i, _| rows[idx[i]].1);
        if let Some(a) = m.clone().lu().solve(&rhs) {
            if (m * &a - &rhs).amax() < 1e-9 && rows.iter().all(|(c, b)| c.dot(&a) <= b + 1e-9) {
                best = best.max(a.dot(x));
            }
        }
        // next combination
        let mut i = s;
        while i > 0 && idx[i - 1] == rows.len() - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for k in i..s {
            idx[k] = idx[k - 1] + 1;
        }
    }
    best.max(0.0)
}

/// Largest norm of a mapped vertex, recomputed from scratch with fresh LPs.
pub fn invariance_excess(out: &EngineOutcome) -> f64 {
    let p = PolytopeVertices::new(out.polytope.kind, out.polytope.vertices.clone()).unwrap();
    let mut worst: f64 = 0.0;
    for a in out.scaled_set.scaled_matrices() {
        for v in &p.vertices {
            let (r, _) = minkowski_norm(&p, &(&a * v), None);
            worst = worst.max(r.value);
        }
    }
    worst
}

/// Relative distance.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn has_real_leading(m: &DMatrix<f64>) -> bool {
    leading_eigenpair(m).map(|e| e.is_real).unwrap_or(false)
}
