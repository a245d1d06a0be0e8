//! Small dense helpers shared by the rest of the crate.
//!
//! Eigenvalues come from nalgebra's real Schur form after a diagonal
//! similarity balancing pass. 1x1 and 2x2 inputs take closed forms, which
//! matters for the search routines that evaluate millions of tiny products.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

use crate::error::{JsrError, Result};

/// Diagonal similarity scaling (power-of-two factors) so that row and column
/// norms are comparable. Eigenvalues are unchanged, up to rounding.
pub fn balance(m: &DMatrix<f64>) -> DMatrix<f64> {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..64 {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    a
}

fn eig2(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 2] {
    let half_tr = 0.5 * (a + d);
    let h = 0.5 * (a - d);
    let disc = h * h + b * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let l1 = if half_tr >= 0.0 { half_tr + sq } else { half_tr - sq };
        let det = a * d - b * c;
        let l2 = if l1 != 0.0 { det / l1 } else { half_tr - sq };
        [Complex64::new(l1, 0.0), Complex64::new(l2, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half_tr, im), Complex64::new(half_tr, -im)]
    }
}

/// Reflector `I - 2uu^T` for an irregular fixed `u`.
fn householder_probe(n: usize) -> DMatrix<f64> {
    let u = DVector::from_fn(n, |i, _| 1.0 + 0.37 * (i as f64 + 1.0).sqrt() + 0.11 * (i % 3) as f64);
    let u = &u / u.norm();
    DMatrix::identity(n, n) - 2.0 * &u * u.transpose()
}

/// All eigenvalues of a square matrix, in no particular order.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Complex64::new(m[(0, 0)], 0.0)]),
        2 => Ok(eig2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]).to_vec()),
        _ => {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(JsrError::NoConvergence);
            }
            let b = balance(m);
            if let Some(s) = Schur::try_new(b.clone(), f64::EPSILON, 1000 * n) {
                return Ok(s.complex_eigenvalues().iter().copied().collect());
            }
            // the shifted QR can cycle on permutation-like matrices; an
            // orthogonal similarity breaks the symmetry
            let h = householder_probe(n);
            let c = &h * b * &h;
            Schur::try_new(c, 4.0 * f64::EPSILON, 5000 * n)
                .map(|s| s.complex_eigenvalues().iter().copied().collect())
                .ok_or(JsrError::NoConvergence)
        }
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 2 {
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let h = 0.5 * (a - d);
        let disc = h * h + b * c;
        let half_tr = 0.5 * (a + d);
        return Ok(if disc >= 0.0 {
            half_tr.abs() + disc.sqrt()
        } else {
            (a * d - b * c).abs().sqrt()
        });
    }
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    match (m.nrows(), m.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, _) | (_, 1) => m.norm(),
        (2, 2) => {
            let f = m.norm_squared();
            let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).abs();
            let root = ((f - 2.0 * det).max(0.0) * (f + 2.0 * det)).sqrt();
            (0.5 * (f + root)).sqrt()
        }
        _ => SVD::new(m.clone(), false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0, f64::max),
    }
}

/// Right singular vectors of `m` ordered by increasing singular value,
/// together with those singular values.
pub fn right_singular_ascending(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let n = m.ncols();
    // pad to square so that the full right basis is produced
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let values = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let vectors = idx.iter().map(|&i| vt.row(i).transpose()).collect();
    (values, vectors)
}

/// Moore-Penrose pseudo-inverse with a relative singular value cutoff.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    svd.pseudo_inverse(rel_tol * smax)
        .unwrap_or_else(|_| DMatrix::zeros(m.ncols(), m.nrows()))
}

/// Orthonormal basis of the span of `vectors` (modified Gram-Schmidt with one
/// reorthogonalisation pass). Vectors whose residual falls below `tol` times
/// their original norm are dropped.
pub fn orthonormalize(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let nw = w.norm();
        if nw > tol * n0 {
            basis.push(w / nw);
        }
    }
    basis
}

/// Square orthogonal matrix whose leading columns span `vectors`.
/// Returns the matrix and the rank of the span.
pub fn orthonormal_completion(vectors: &[DVector<f64>], dim: usize) -> (DMatrix<f64>, usize) {
    let mut cols = orthonormalize(vectors, 1e-10);
    let rank = cols.len();
    let mut all: Vec<DVector<f64>> = cols.clone();
    for i in 0..dim {
        all.push(DVector::from_fn(dim, |r, _| if r == i { 1.0 } else { 0.0 }));
    }
    cols = orthonormalize(&all, 1e-8);
    cols.truncate(dim);
    (DMatrix::from_columns(&cols), rank)
}
