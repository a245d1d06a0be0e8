//! Screening before the polytope algorithm: common invariant subspaces,
//! block triangularisation and the choice of hull.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg;
use crate::matrixset::{leading_eigenpair, EigenPair, MatrixSet};

const RESIDUAL_TOL: f64 = 1e-8;
/// Matrices beyond this count are not scanned for eigenvector seeds.
const MAX_EIGEN_SEEDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    /// Nonnegative matrices, cone hull.
    P,
    /// Real leading eigenvector, symmetrized hull.
    R,
    /// Complex leading eigenvector; unsupported.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Heuristic {
    Permutation,
    EigenvectorClosure,
    DifferenceSubspace,
}

#[derive(Debug, Clone)]
pub struct ReducibilityReport {
    /// No heuristic fired. This is not a proof of irreducibility.
    pub irreducible: bool,
    /// Orthonormal columns spanning a common invariant subspace.
    pub subspace_basis: Option<DMatrix<f64>>,
    pub heuristic: Option<Heuristic>,
    /// Diagonal blocks of the recursive block triangularisation.
    pub blocks: Option<Vec<MatrixSet>>,
    pub case_tag: CaseTag,
}

/// `‖(I - UUᵀ) A U‖ / ‖A‖`, maximised over the set.
pub fn invariance_residual(set: &MatrixSet, u: &DMatrix<f64>) -> f64 {
    let proj = u * u.transpose();
    set.matrices()
        .iter()
        .map(|a| {
            let au = a * u;
            let r = &au - &proj * &au;
            let na = a.norm();
            if na == 0.0 { 0.0 } else { r.norm() / na }
        })
        .fold(0.0, f64::max)
}

pub fn find_common_invariant_subspace(set: &MatrixSet) -> ReducibilityReport {
    let case_tag = classify_set(set);
    match find_subspace(set) {
        Some((u, h)) => ReducibilityReport {
            irreducible: false,
            blocks: Some(decompose(set, Some(u.clone()))),
            subspace_basis: Some(u),
            heuristic: Some(h),
            case_tag,
        },
        None => ReducibilityReport { irreducible: true, subspace_basis: None, heuristic: None, blocks: None, case_tag },
    }
}

fn find_subspace(set: &MatrixSet) -> Option<(DMatrix<f64>, Heuristic)> {
    if set.dim() < 2 {
        return None;
    }
    let accept = |u: DMatrix<f64>| (invariance_residual(set, &u) <= RESIDUAL_TOL).then_some(u);
    if let Some(u) = permutation_subspace(set).and_then(accept) {
        return Some((u, Heuristic::Permutation));
    }
    if let Some(u) = eigenvector_closure(set).and_then(accept) {
        return Some((u, Heuristic::EigenvectorClosure));
    }
    if let Some(u) = difference_subspace(set).and_then(accept) {
        return Some((u, Heuristic::DifferenceSubspace));
    }
    None
}

/// Splits along `u` (or a freshly found subspace) and recurses into both
/// diagonal blocks.
fn decompose(set: &MatrixSet, u: Option<DMatrix<f64>>) -> Vec<MatrixSet> {
    let u = match u.or_else(|| find_subspace(set).map(|(u, _)| u)) {
        Some(u) => u,
        None => return vec![set.clone()],
    };
    let s = set.dim();
    let d = u.ncols();
    let cols: Vec<DVector<f64>> = u.column_iter().map(|c| c.into_owned()).collect();
    let (q, rank) = linalg::orthonormal_completion(&cols, s);
    if rank != d || q.ncols() != s {
        return vec![set.clone()];
    }
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for a in set.matrices() {
        let b = q.transpose() * a * &q;
        top.push(b.view((0, 0), (d, d)).into_owned());
        bottom.push(b.view((d, d), (s - d, s - d)).into_owned());
    }
    let wrap = |m: Vec<DMatrix<f64>>| MatrixSet::new(m).and_then(|x| x.scaled(set.scale()));
    match (wrap(top), wrap(bottom)) {
        (Ok(t), Ok(b)) => {
            let mut out = decompose(&t, None);
            out.extend(decompose(&b, None));
            out
        }
        _ => vec![set.clone()],
    }
}

fn unit(dim: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(dim, |r, _| if r == i { 1.0 } else { 0.0 })
}

/// Coordinate subspace closed under the joint zero pattern, from a sink
/// strongly connected component of the graph `i -> j` iff some `A[j][i] != 0`.
fn permutation_subspace(set: &MatrixSet) -> Option<DMatrix<f64>> {
    let s = set.dim();
    let adj: Vec<Vec<usize>> = (0..s)
        .map(|i| (0..s).filter(|&j| j != i && set.matrices().iter().any(|a| a[(j, i)] != 0.0)).collect())
        .collect();
    let comp = tarjan(&adj);
    let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
    if ncomp < 2 {
        return None;
    }
    // a component with no edges leaving it
    let sink = (0..ncomp).find(|&c| (0..s).filter(|&i| comp[i] == c).all(|i| adj[i].iter().all(|&j| comp[j] == c)))?;
    let cols: Vec<DVector<f64>> = (0..s).filter(|&i| comp[i] == sink).map(|i| unit(s, i)).collect();
    Some(DMatrix::from_columns(&cols))
}

fn tarjan(adj: &[Vec<usize>]) -> Vec<usize> {
    struct St<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        comp: Vec<usize>,
        next: usize,
        ncomp: usize,
    }
    fn visit(st: &mut St, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on[v] = true;
        for k in 0..st.adj[v].len() {
            let w = st.adj[v][k];
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            while let Some(w) = st.stack.pop() {
                st.on[w] = false;
                st.comp[w] = st.ncomp;
                if w == v {
                    break;
                }
            }
            st.ncomp += 1;
        }
    }
    let n = adj.len();
    let mut st = St {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on: vec![false; n],
        stack: Vec::new(),
        comp: vec![0; n],
        next: 0,
        ncomp: 0,
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.comp
}

/// Eigenvectors (or real bases of complex eigenpairs) of a single matrix.
fn eigen_seeds(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let s = a.nrows();
    let Ok(eigs) = linalg::eigenvalues(a) else { return Vec::new() };
    let scale = linalg::norm2(a).max(f64::MIN_POSITIVE);
    let mut seeds = Vec::new();
    let mut seen: Vec<num_complex::Complex64> = Vec::new();
    for z in eigs {
        if z.im < -1e-12 * scale || seen.iter().any(|w| (w - z).norm() <= 1e-9 * scale) {
            continue;
        }
        seen.push(z);
        let (m, tol) = if z.im.abs() <= 1e-12 * scale {
            (a - DMatrix::identity(s, s) * z.re, 1e-8 * scale)
        } else {
            (a * a - a * (2.0 * z.re) + DMatrix::identity(s, s) * z.norm_sqr(), 1e-8 * scale * scale)
        };
        let (sv, vecs) = linalg::right_singular_ascending(&m);
        for (sigma, v) in sv.iter().zip(vecs) {
            if *sigma <= tol {
                seeds.push(v);
            } else {
                break;
            }
        }
    }
    seeds
}

/// Smallest subspace containing `seed` and invariant under every matrix,
/// or `None` once it fills the space.
fn krylov_closure(mats: &[DMatrix<f64>], seed: &DVector<f64>) -> Option<DMatrix<f64>> {
    let s = seed.len();
    let mut basis = linalg::orthonormalize(std::slice::from_ref(seed), 1e-12);
    let mut next = 0;
    while next < basis.len() {
        let q = basis[next].clone();
        next += 1;
        for a in mats {
            let mut w = a * &q;
            let nw = w.norm();
            if nw <= RESIDUAL_TOL * a.norm() {
                continue;
            }
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let r = w.norm();
            if r > RESIDUAL_TOL * a.norm().max(nw) {
                basis.push(w / r);
                if basis.len() >= s {
                    return None;
                }
            }
        }
    }
    (!basis.is_empty()).then(|| DMatrix::from_columns(&basis))
}

fn eigenvector_closure(set: &MatrixSet) -> Option<DMatrix<f64>> {
    let s = set.dim();
    let mats = set.matrices();
    let tmats: Vec<DMatrix<f64>> = mats.iter().map(|a| a.transpose()).collect();
    for (forward, group) in [(true, mats), (false, &tmats[..])] {
        for a in group.iter().take(MAX_EIGEN_SEEDS) {
            for seed in eigen_seeds(a) {
                if let Some(w) = krylov_closure(group, &seed) {
                    if forward {
                        return Some(w);
                    }
                    // the orthogonal complement of a transposed-invariant
                    // subspace is invariant
                    let cols: Vec<DVector<f64>> = w.column_iter().map(|c| c.into_owned()).collect();
                    let (q, rank) = linalg::orthonormal_completion(&cols, s);
                    if rank == cols.len() && rank < s {
                        return Some(q.columns(rank, s - rank).into_owned());
                    }
                }
            }
        }
    }
    None
}

/// `ones^⊥` (differences `e_i - e_{i+1}`) or `span{ones}`.
fn difference_subspace(set: &MatrixSet) -> Option<DMatrix<f64>> {
    let s = set.dim();
    let ones = DVector::from_element(s, 1.0 / (s as f64).sqrt());
    let eigvec = |m: &DMatrix<f64>| {
        let y = m * &ones;
        let c = y.dot(&ones);
        (&y - &ones * c).norm() <= RESIDUAL_TOL * m.norm().max(f64::MIN_POSITIVE)
    };
    if set.matrices().iter().all(|a| eigvec(&a.transpose())) {
        let (q, _) = linalg::orthonormal_completion(std::slice::from_ref(&ones), s);
        return Some(q.columns(1, s - 1).into_owned());
    }
    if set.matrices().iter().all(eigvec) {
        return Some(DMatrix::from_columns(&[ones]));
    }
    None
}

/// Hull choice for a candidate with leading eigenpair `leading`.
pub fn classify_case(set: &MatrixSet, leading: &EigenPair) -> CaseTag {
    match &leading.vector {
        Some(v) if leading.is_real => {
            if set.is_nonnegative() && v.iter().all(|&x| x >= -1e-12) {
                CaseTag::P
            } else {
                CaseTag::R
            }
        }
        _ => CaseTag::C,
    }
}

/// Classification using the single matrix of largest spectral radius.
fn classify_set(set: &MatrixSet) -> CaseTag {
    let best = set
        .matrices()
        .iter()
        .filter_map(|a| leading_eigenpair(a).ok())
        .max_by(|x, y| x.value.abs().total_cmp(&y.value.abs()));
    match best {
        Some(p) => classify_case(set, &p),
        None => CaseTag::R,
    }
}
