use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{JsrError, Result};
use crate::gripenberg::SearchReport;
use crate::matrixset::{dual_leading_eigenvector, leading_eigenpair, EigenPair, MatrixSet, ProductWord};

#[derive(Debug, Clone)]
pub struct Candidate {
    pub word: ProductWord,
    /// `rho(P)^(1/len)`.
    pub rho: f64,
    pub eigen: EigenPair,
    /// Left leading eigenvector with `<v, v*> = 1`; missing when the leading
    /// eigenvalue is not simple.
    pub dual: Option<DVector<f64>>,
}

impl Candidate {
    pub fn new(mats: &[DMatrix<f64>], word: ProductWord) -> Result<Self> {
        if word.is_empty() {
            return Err(JsrError::EmptyWord);
        }
        if let Some(&index) = word.indices.iter().find(|&&j| j >= mats.len()) {
            return Err(JsrError::IndexOutOfRange { index, count: mats.len() });
        }
        let s = mats[0].nrows();
        let mut p = DMatrix::identity(s, s);
        for &j in &word.indices {
            p = &mats[j] * p;
        }
        let eigen = leading_eigenpair(&p)?;
        let rho = eigen.value.abs().powf(1.0 / word.len() as f64);
        let dual = match (&eigen.vector, eigen.is_real) {
            (Some(v), true) => dual_leading_eigenvector(&p, v).ok(),
            _ => None,
        };
        Ok(Self { word, rho, eigen, dual })
    }

    /// Leading eigenvector, with entries below `1e-14` in modulus clipped
    /// to zero when it is nonnegative up to rounding.
    pub fn vector(&self) -> Result<DVector<f64>> {
        let v = self.eigen.vector.clone().ok_or(JsrError::ComplexLeading)?;
        if v.iter().all(|&x| x >= -1e-14) {
            Ok(v.map(|x| x.max(0.0)))
        } else {
            Ok(v)
        }
    }

    /// Cyclic root `v^(i) = rho^-i A_{j_i} ... A_{j_1} v`, `i < len`.
    pub fn roots(&self, mats: &[DMatrix<f64>]) -> Result<Vec<DVector<f64>>> {
        let mut cur = self.vector()?;
        let mut out = vec![cur.clone()];
        for &j in &self.word.indices[..self.word.len() - 1] {
            cur = &mats[j] * cur / self.rho;
            out.push(cur.clone());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub smps: Vec<Candidate>,
    pub nearly: Vec<Candidate>,
    pub rho_c: f64,
}

impl CandidateSet {
    /// Candidates from explicit words, kept in the given rotation.
    pub fn from_words(set: &MatrixSet, smps: &[ProductWord], nearly: &[ProductWord]) -> Result<Self> {
        let mats = set.scaled_matrices();
        let smps = smps.iter().map(|w| Candidate::new(&mats, w.clone())).collect::<Result<Vec<_>>>()?;
        if smps.is_empty() {
            return Err(JsrError::InvalidOption("no s.m.p. candidates".into()));
        }
        for c in &smps {
            if !c.eigen.is_real {
                return Err(JsrError::ComplexLeading);
            }
        }
        let nearly = nearly.iter().map(|w| Candidate::new(&mats, w.clone())).collect::<Result<Vec<_>>>()?;
        let rho_c = smps.iter().map(|c| c.rho).fold(0.0, f64::max);
        if rho_c <= 0.0 {
            return Err(JsrError::InvalidSet("s.m.p. candidates have spectral radius zero".into()));
        }
        Ok(Self { smps, nearly, rho_c })
    }

    pub fn all(&self) -> impl Iterator<Item = &Candidate> {
        self.smps.iter().chain(&self.nearly)
    }
}

/// At most this many nearly-s.m.p.s enter the root.
pub const MAX_NEARLY: usize = 8;
pub const MAX_SMPS: usize = 8;

/// Tied maximizers, shortest first, without those that split cyclically
/// into rotations of words already kept.
pub fn reduce_ties(words: &[ProductWord]) -> Vec<ProductWord> {
    let mut sorted: Vec<ProductWord> = words.to_vec();
    sorted.sort_by_key(|w| w.len());
    let mut kept: Vec<ProductWord> = Vec::new();
    let mut pieces: Vec<Vec<usize>> = Vec::new();
    for w in sorted {
        if kept.len() >= MAX_SMPS {
            break;
        }
        let n = w.len();
        let composite = (0..n).any(|r| {
            let rot: Vec<usize> = w.indices[r..].iter().chain(&w.indices[..r]).copied().collect();
            splits(&rot, &pieces)
        });
        if composite || kept.iter().any(|k| k.canonical() == w.canonical()) {
            continue;
        }
        for r in 0..n {
            pieces.push(w.indices[r..].iter().chain(&w.indices[..r]).copied().collect());
        }
        kept.push(w);
    }
    kept
}

fn splits(w: &[usize], pieces: &[Vec<usize>]) -> bool {
    let n = w.len();
    let mut ok = vec![false; n + 1];
    ok[0] = true;
    for i in 0..n {
        if !ok[i] {
            continue;
        }
        for p in pieces {
            if i + p.len() <= n && w[i..i + p.len()] == p[..] {
                ok[i + p.len()] = true;
            }
        }
    }
    ok[n]
}

/// Maximizers of the search become the s.m.p.s; shorter words within `tau`
/// of `rho_c` with real leading eigenvectors become nearly-s.m.p.s.
pub fn build_candidates(set: &MatrixSet, search: &SearchReport, tau: f64) -> Result<CandidateSet> {
    if search.candidates.is_empty() {
        return Err(JsrError::InvalidOption("search produced no candidates".into()));
    }
    let mut cs = CandidateSet::from_words(set, &reduce_ties(&search.candidates), &[])?;
    let min_len = cs.smps.iter().map(|c| c.word.len()).min().unwrap_or(0);
    let mats = set.scaled_matrices();
    for (w, _) in &search.near {
        if cs.nearly.len() >= MAX_NEARLY {
            break;
        }
        if w.len() >= min_len || cs.smps.iter().any(|c| c.word.canonical() == w.canonical()) {
            continue;
        }
        let Ok(c) = Candidate::new(&mats, w.clone()) else { continue };
        if c.rho >= tau * cs.rho_c && c.rho < cs.rho_c && c.eigen.is_real && c.eigen.is_simple && c.dual.is_some() {
            cs.nearly.push(c);
        }
    }
    Ok(cs)
}

/// Left singular directions of the root matrix whose singular values fall
/// below `t` times the largest one (including the directions missing from
/// a rank-deficient root).
pub fn compute_extra_vertices(roots: &[DVector<f64>], t: f64) -> Vec<DVector<f64>> {
    let Some(first) = roots.first() else { return Vec::new() };
    let s = first.len();
    let h = DMatrix::from_columns(roots);
    let g = &h * h.transpose();
    let eig = SymmetricEigen::new(g);
    let sig: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let smax = sig.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..s).filter(|&k| sig[k] < t * smax).collect();
    idx.sort_by(|&a, &b| sig[a].total_cmp(&sig[b]).then(a.cmp(&b)));
    idx.into_iter()
        .map(|k| {
            let u = eig.eigenvectors.column(k).into_owned();
            let i = u.iamax();
            if u[i] < 0.0 { -u } else { u }
        })
        .collect()
}

/// Cone variant: unit vectors on the coordinates the roots barely reach.
pub fn compute_extra_vertices_cone(roots: &[DVector<f64>], t: f64) -> Vec<DVector<f64>> {
    let Some(first) = roots.first() else { return Vec::new() };
    let s = first.len();
    let reach: Vec<f64> = (0..s).map(|l| roots.iter().map(|v| v[l]).fold(0.0, f64::max)).collect();
    let top = reach.iter().copied().fold(0.0, f64::max);
    (0..s)
        .filter(|&l| reach[l] < t * top)
        .map(|l| DVector::from_fn(s, |r, _| if r == l { 1.0 } else { 0.0 }))
        .collect()
}
