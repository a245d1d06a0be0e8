use std::fmt;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};

use crate::error::{JsrError, Result};
use crate::linalg;

/// Ordered family of square matrices sharing a dimension, plus a positive
/// scale factor applied to every member.
#[derive(Debug, Clone)]
pub struct MatrixSet {
    matrices: Vec<DMatrix<f64>>,
    dim: usize,
    scale: f64,
}

impl MatrixSet {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| JsrError::InvalidSet("no matrices".into()))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(JsrError::InvalidSet("zero dimension".into()));
        }
        for (j, m) in matrices.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(JsrError::InvalidSet(format!(
                    "matrix {} is {}x{}, expected {dim}x{dim}",
                    j + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(JsrError::InvalidSet(format!("matrix {} has non-finite entries", j + 1)));
            }
        }
        Ok(Self { matrices, dim, scale: 1.0 })
    }

    /// Convenience constructor from row-major slices.
    pub fn from_rows(dim: usize, rows: &[&[f64]]) -> Result<Self> {
        let mats = rows
            .iter()
            .map(|r| {
                if r.len() != dim * dim {
                    Err(JsrError::InvalidSet(format!("expected {} entries, got {}", dim * dim, r.len())))
                } else {
                    Ok(DMatrix::from_row_slice(dim, dim, r))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mats)
    }

    /// Copy with the scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let scale = self.scale * factor;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(JsrError::InvalidSet(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { scale, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.matrices.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Unscaled members.
    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn scaled_matrix(&self, j: usize) -> DMatrix<f64> {
        &self.matrices[j] * self.scale
    }

    pub fn scaled_matrices(&self) -> Vec<DMatrix<f64>> {
        (0..self.count()).map(|j| self.scaled_matrix(j)).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.matrices.iter().all(|m| m.iter().all(|&x| x >= -1e-14))
    }

    pub fn transposed(&self) -> Self {
        Self {
            matrices: self.matrices.iter().map(|m| m.transpose()).collect(),
            ..self.clone()
        }
    }

    fn check_word(&self, word: &ProductWord) -> Result<()> {
        match word.indices.iter().find(|&&j| j >= self.count()) {
            Some(&index) => Err(JsrError::IndexOutOfRange { index, count: self.count() }),
            None => Ok(()),
        }
    }

    /// Product of the unscaled matrices, first index applied first.
    pub fn evaluate_unscaled(&self, word: &ProductWord) -> Result<DMatrix<f64>> {
        self.check_word(word)?;
        let mut p = DMatrix::identity(self.dim, self.dim);
        for &j in &word.indices {
            p = &self.matrices[j] * p;
        }
        Ok(p)
    }

    /// Product including `scale^n`.
    pub fn evaluate(&self, word: &ProductWord) -> Result<DMatrix<f64>> {
        let p = self.evaluate_unscaled(word)?;
        Ok(p * self.scale.powi(word.len() as i32))
    }

    /// `rho(P)^(1/n)` of the unscaled product, a lower bound for the JSR.
    pub fn normalized_spectral_radius(&self, word: &ProductWord) -> Result<f64> {
        if word.is_empty() {
            return Err(JsrError::EmptyWord);
        }
        let p = self.evaluate_unscaled(word)?;
        Ok(linalg::spectral_radius(&p)?.powf(1.0 / word.len() as f64))
    }

    /// Parse the plain text format: `s J` header, then `J` blocks of `s`
    /// rows. Lines starting with `#` are ignored, and `p/q` literals are
    /// accepted.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(JsrError::Parse { line: 0, msg: "empty input".into() })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(JsrError::Parse { line: hline, msg: "header must be `s J`".into() });
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| JsrError::Parse { line: hline, msg: format!("bad integer `{s}`") })
        };
        let (s, count) = (parse_usize(head[0])?, parse_usize(head[1])?);
        if s == 0 || count == 0 {
            return Err(JsrError::Parse { line: hline, msg: "s and J must be positive".into() });
        }
        let mut mats = Vec::with_capacity(count);
        for _ in 0..count {
            let mut m = DMatrix::zeros(s, s);
            for r in 0..s {
                let (ln, row) = lines.next().ok_or(JsrError::Parse {
                    line: hline,
                    msg: format!("expected {count} blocks of {s} rows"),
                })?;
                let vals = row
                    .split_whitespace()
                    .map(|tok| parse_number(tok).ok_or(JsrError::Parse { line: ln, msg: format!("bad number `{tok}`") }))
                    .collect::<Result<Vec<f64>>>()?;
                if vals.len() != s {
                    return Err(JsrError::Parse { line: ln, msg: format!("expected {s} entries, got {}", vals.len()) });
                }
                for (c, v) in vals.into_iter().enumerate() {
                    m[(r, c)] = v;
                }
            }
            mats.push(m);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(JsrError::Parse { line: ln, msg: "trailing data".into() });
        }
        Self::new(mats).map_err(|e| JsrError::Parse { line: hline, msg: e.to_string() })
    }

    /// Inverse of [`MatrixSet::parse`] (unscaled matrices, full precision).
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.dim, self.count());
        for (j, m) in self.matrices.iter().enumerate() {
            out.push_str(&format!("# A{}\n", j + 1));
            for r in 0..self.dim {
                let row: Vec<String> = (0..self.dim).map(|c| format!("{:e}", m[(r, c)])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    let v = match tok.split_once('/') {
        Some((p, q)) => p.parse::<f64>().ok()? / q.parse::<f64>().ok()?,
        None => tok.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

/// Index sequence `(j_1, ..., j_n)` naming `A_{j_n} ... A_{j_1}`.
/// Indices are zero based; `Display` prints them one based.
#[derive(Debug, Clone, Default)]
pub struct ProductWord {
    pub indices: Vec<usize>,
    pub cached_spectral_radius: Option<f64>,
    pub cached_norm: Option<f64>,
}

impl PartialEq for ProductWord {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices
    }
}
impl Eq for ProductWord {}

impl Hash for ProductWord {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.indices.hash(state);
    }
}

impl From<Vec<usize>> for ProductWord {
    fn from(indices: Vec<usize>) -> Self {
        Self::new(indices)
    }
}

impl ProductWord {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices, cached_spectral_radius: None, cached_norm: None }
    }

    /// Build from one based indices, as written by users.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        indices
            .iter()
            .map(|&j| j.checked_sub(1).ok_or(JsrError::IndexOutOfRange { index: 0, count: 0 }))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Word of `self` followed by `j` (so `A_j` is applied last).
    pub fn extended(&self, j: usize) -> Self {
        let mut indices = Vec::with_capacity(self.len() + 1);
        indices.extend_from_slice(&self.indices);
        indices.push(j);
        Self::new(indices)
    }

    /// Least rotation of the primitive root.
    pub fn canonical(&self) -> Self {
        Self::new(canonicalize_indices(&self.indices))
    }

    /// Space separated one based indices.
    pub fn plain(&self) -> String {
        self.indices.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(" ")
    }
}

/// Compact display with run-length exponents, e.g. `1^15 2`.
impl fmt::Display for ProductWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.indices.len() {
            let j = self.indices[i];
            let mut k = i;
            while k < self.indices.len() && self.indices[k] == j {
                k += 1;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            if k - i > 1 {
                write!(f, "{}^{}", j + 1, k - i)?;
            } else {
                write!(f, "{}", j + 1)?;
            }
            i = k;
        }
        if first {
            f.write_str("()")?;
        }
        Ok(())
    }
}

pub fn canonicalize_word(word: &ProductWord) -> ProductWord {
    word.canonical()
}

fn canonicalize_indices(w: &[usize]) -> Vec<usize> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    let period = (1..=n)
        .find(|&p| n.is_multiple_of(p) && (p..n).all(|i| w[i] == w[i - p]))
        .unwrap_or(n);
    let root = &w[..period];
    let mut best: Vec<usize> = root.to_vec();
    for r in 1..period {
        let rot: Vec<usize> = root[r..].iter().chain(&root[..r]).copied().collect();
        if rot < best {
            best = rot;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    /// Leading eigenvalue; signed when real, the modulus otherwise.
    pub value: f64,
    /// Unit eigenvector; `None` when the leading eigenvalue is complex.
    pub vector: Option<DVector<f64>>,
    pub is_real: bool,
    pub is_simple: bool,
}

const GAP_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-8;

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    linalg::spectral_radius(m)
}

pub fn leading_eigenpair(m: &DMatrix<f64>) -> Result<EigenPair> {
    let eig = linalg::eigenvalues(m)?;
    let r = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if r == 0.0 {
        let (_, vecs) = linalg::right_singular_ascending(m);
        return Ok(EigenPair {
            value: 0.0,
            vector: Some(sign_fix(vecs[0].clone())),
            is_real: true,
            is_simple: m.nrows() == 1,
        });
    }
    let top: Vec<_> = eig.iter().filter(|z| z.norm() >= r * (1.0 - GAP_TOL)).collect();
    let is_real = top.iter().all(|z| z.im.abs() <= IMAG_TOL * r);
    let is_simple = top.len() == 1;
    if !is_real {
        return Ok(EigenPair { value: r, vector: None, is_real, is_simple });
    }
    // prefer +r when both signs tie
    let value = if top.iter().any(|z| z.re > 0.0) { r } else { -r };
    let shifted = m - DMatrix::identity(m.nrows(), m.nrows()) * value;
    let (_, vecs) = linalg::right_singular_ascending(&shifted);
    let v = sign_fix(vecs[0].clone());
    Ok(EigenPair { value, vector: Some(v), is_real, is_simple })
}

fn sign_fix(v: DVector<f64>) -> DVector<f64> {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best.abs() + 1e-12 {
            best = x;
            sign = x.signum();
        }
    }
    let v = v * sign;
    let n = v.norm();
    v / n
}

/// Left eigenvector for the leading eigenvalue of `m`, scaled so that
/// `<v, v*> = 1`.
pub fn dual_leading_eigenvector(m: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let pair = leading_eigenpair(m)?;
    if !pair.is_real {
        return Err(JsrError::ComplexLeading);
    }
    let n = m.nrows();
    let shifted = m.transpose() - DMatrix::identity(n, n) * pair.value;
    let (sv, vecs) = linalg::right_singular_ascending(&shifted);
    let scale = linalg::norm2(m).max(f64::MIN_POSITIVE);
    // left eigenspace: all near-null singular vectors (at least one)
    let cut = (1e-8 * scale).max(sv[0] * 10.0);
    let basis: Vec<&DVector<f64>> = sv.iter().zip(&vecs).filter(|(s, _)| **s <= cut).map(|(_, u)| u).collect();
    let mut proj = DVector::zeros(n);
    for u in basis {
        proj.axpy(u.dot(v), u, 1.0);
    }
    let ip = proj.dot(v);
    if ip.abs() < 1e-8 * v.norm_squared() {
        return Err(JsrError::DefectiveLeading);
    }
    Ok(proj / ip)
}
