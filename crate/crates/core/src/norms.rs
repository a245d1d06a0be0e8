//! Minkowski norms of symmetrized hulls and positive cones, plus the cheap
//! inside/outside estimates that let most vectors skip the LP.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{JsrError, Result};
use crate::linalg;
pub use crate::lp::{HullKind, LpBasis};
use crate::lp::{HullLp, LpStatus};
use crate::matrixset::ProductWord;

#[derive(Debug, Clone, Default)]
pub struct VertexMeta {
    pub parent: Option<ProductWord>,
    pub iteration: usize,
    pub alpha: f64,
    pub essential: bool,
}

#[derive(Debug, Clone)]
pub struct PolytopeVertices {
    pub kind: HullKind,
    pub vertices: Vec<DVector<f64>>,
    pub meta: Vec<VertexMeta>,
}

impl PolytopeVertices {
    pub fn new(kind: HullKind, vertices: Vec<DVector<f64>>) -> Result<Self> {
        let first = vertices.first().ok_or_else(|| JsrError::InvalidSet("polytope needs a vertex".into()))?;
        let s = first.len();
        if vertices.iter().any(|v| v.len() != s) {
            return Err(JsrError::InvalidSet("vertex dimensions differ".into()));
        }
        if kind == HullKind::Cone && vertices.iter().any(|v| v.iter().any(|&x| x < -1e-14)) {
            return Err(JsrError::InvalidSet("cone vertices must be nonnegative".into()));
        }
        let meta = vec![VertexMeta { alpha: 1.0, essential: true, ..Default::default() }; vertices.len()];
        Ok(Self { kind, vertices, meta })
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.vertices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum NormStatus {
    Exact,
    UpperBoundOnly,
    InsideByEstimate,
    OutsideByEstimate,
}

#[derive(Debug, Clone)]
pub enum Certificate {
    /// `V t = x`; `||t||_1` (or `sum u`) is the value.
    Coefficients(DVector<f64>),
    /// Separating functional.
    Functional(DVector<f64>),
}

/// `value` is always an upper bound on the true norm (exact when
/// `status == Exact`); `+inf` means "not representable".
#[derive(Debug, Clone)]
pub struct NormResult {
    pub value: f64,
    pub status: NormStatus,
    pub certificate: Option<Certificate>,
}

/// Exact Minkowski norm by linear programming.
pub fn minkowski_norm(p: &PolytopeVertices, x: &DVector<f64>, warm: Option<&LpBasis>) -> (NormResult, Option<LpBasis>) {
    let lp = HullLp::new(p.matrix(), p.kind);
    lp_norm(&lp, x, warm)
}

fn lp_norm(lp: &HullLp, x: &DVector<f64>, warm: Option<&LpBasis>) -> (NormResult, Option<LpBasis>) {
    let sol = lp.solve(x, warm);
    let status = match sol.status {
        LpStatus::Optimal | LpStatus::Infeasible => NormStatus::Exact,
        LpStatus::PivotLimit => NormStatus::UpperBoundOnly,
    };
    let certificate = match sol.status {
        LpStatus::Infeasible => None,
        _ => Some(Certificate::Coefficients(sol.coeffs)),
    };
    (NormResult { value: sol.value, status, certificate }, sol.basis)
}

/// `||t||_1`, an upper bound whenever `V t = x`.
pub fn estimate_upper_by_coefficients(p: &PolytopeVertices, x: &DVector<f64>, t: &DVector<f64>) -> Result<f64> {
    let r = p.matrix() * t - x;
    let tol = 1e-10 * x.amax().max(1.0);
    if r.amax() > tol {
        return Err(JsrError::Residual(r.amax()));
    }
    Ok(t.lp_norm(1))
}

/// `||V^+ x||_2`, a lower bound for the symmetrized hull norm.
pub fn estimate_lower_by_pseudoinverse(p: &PolytopeVertices, x: &DVector<f64>) -> f64 {
    (linalg::pseudo_inverse(&p.matrix(), 1e-12) * x).norm()
}

/// True when `w` separates `x` from the hull, which forces the norm above 1.
/// For cones only nonnegative functionals are meaningful.
pub fn estimate_outside_by_hyperplane(p: &PolytopeVertices, x: &DVector<f64>, w: &DVector<f64>) -> bool {
    match p.kind {
        HullKind::Symmetrized => {
            let wx = w.dot(x).abs();
            p.vertices.iter().all(|v| w.dot(v).abs() < wx)
        }
        HullKind::Cone => {
            if w.iter().any(|&c| c < 0.0) {
                return false;
            }
            let wx = w.dot(x);
            p.vertices.iter().all(|v| w.dot(v) < wx)
        }
    }
}

/// Componentwise domination by a single vertex (cone hulls only).
pub fn estimate_inside_by_domination(p: &PolytopeVertices, x: &DVector<f64>) -> bool {
    p.kind == HullKind::Cone && p.vertices.iter().any(|v| x.iter().zip(v.iter()).all(|(a, b)| a <= b))
}

/// True iff every vertex of `w` lies in the hull of `v`, i.e. `co W ⊆ co V`.
pub fn monotone_norm_inclusion(w: &PolytopeVertices, v: &PolytopeVertices) -> bool {
    if w.kind != v.kind {
        return false;
    }
    let lp = HullLp::new(v.matrix(), v.kind);
    let mut basis: Option<LpBasis> = None;
    for x in &w.vertices {
        let sol = lp.solve(x, basis.as_ref());
        if sol.status != LpStatus::Optimal || sol.value > 1.0 + 1e-12 {
            return false;
        }
        basis = sol.basis;
    }
    true
}

/// Smallest `c` with `x <= c v` for some vertex `v`.
fn domination_factor(vertices: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for v in vertices.column_iter() {
        let mut c = 0.0f64;
        for (a, b) in x.iter().zip(v.iter()) {
            if *a <= 0.0 {
                continue;
            }
            if *b <= 0.0 {
                c = f64::INFINITY;
                break;
            }
            c = c.max(a / b);
            if c >= best {
                break;
            }
        }
        best = best.min(c);
    }
    best
}

/// One revision of a polytope, frozen for concurrent queries.
#[derive(Debug)]
pub struct FrozenHull {
    lp: HullLp,
    pinv: OnceLock<DMatrix<f64>>,
    /// trial functionals with their precomputed support values
    trials: Vec<(DVector<f64>, f64)>,
}

impl FrozenHull {
    pub fn new(kind: HullKind, vertices: &[DVector<f64>]) -> Self {
        Self { lp: HullLp::new(DMatrix::from_columns(vertices), kind), pinv: OnceLock::new(), trials: Vec::new() }
    }

    /// Extra separating functionals tried before the LP (e.g. dual leading
    /// eigenvectors).
    pub fn with_functionals(mut self, ws: &[DVector<f64>]) -> Self {
        for w in ws {
            if self.kind() == HullKind::Cone && w.iter().any(|&c| c < 0.0) {
                continue;
            }
            let h = self.support(w);
            self.trials.push((w.clone(), h));
        }
        self
    }

    fn support(&self, w: &DVector<f64>) -> f64 {
        let g = self.lp.vertices().tr_mul(w);
        match self.kind() {
            HullKind::Symmetrized => g.amax(),
            HullKind::Cone => g.max().max(0.0),
        }
    }

    pub fn kind(&self) -> HullKind {
        self.lp.kind()
    }

    pub fn len(&self) -> usize {
        self.lp.vertices().ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertices(&self) -> &DMatrix<f64> {
        self.lp.vertices()
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        self.pinv.get_or_init(|| linalg::pseudo_inverse(self.lp.vertices(), 1e-12))
    }

    pub fn exact(&self, x: &DVector<f64>, warm: Option<&LpBasis>) -> (NormResult, Option<LpBasis>) {
        lp_norm(&self.lp, x, warm)
    }

    /// Decide whether `||x|| <= threshold` using the estimates first and the
    /// LP only when they are inconclusive. With `exact_outside` the LP also
    /// runs for points already known to be outside, so the returned value is
    /// tight.
    pub fn estimate(
        &self,
        x: &DVector<f64>,
        threshold: f64,
        exact_outside: bool,
        warm: Option<&LpBasis>,
    ) -> (NormResult, Option<LpBasis>) {
        match self.kind() {
            HullKind::Cone => {
                let c = domination_factor(self.lp.vertices(), x);
                if c <= threshold {
                    return (NormResult { value: c, status: NormStatus::InsideByEstimate, certificate: None }, None);
                }
                if !exact_outside {
                    let hit = self.trials.iter().any(|(w, h)| w.dot(x) > *h) || {
                        let h = self.support(x);
                        x.norm_squared() > h
                    };
                    if hit && c.is_finite() {
                        return (NormResult { value: c, status: NormStatus::OutsideByEstimate, certificate: None }, None);
                    }
                }
                self.exact(x, warm)
            }
            HullKind::Symmetrized => {
                let t = self.pinv() * x;
                let resid = (self.lp.vertices() * &t - x).amax();
                let in_span = resid <= 1e-9 * x.amax().max(f64::MIN_POSITIVE);
                if in_span {
                    let upper = t.lp_norm(1);
                    if upper <= threshold {
                        return (
                            NormResult {
                                value: upper,
                                status: NormStatus::InsideByEstimate,
                                certificate: Some(Certificate::Coefficients(t)),
                            },
                            None,
                        );
                    }
                    if !exact_outside {
                        let lower = t.norm();
                        let sep = if lower > 1.0 {
                            None
                        } else {
                            self.trials
                                .iter()
                                .find(|(w, h)| w.dot(x).abs() > *h)
                                .map(|(w, _)| w.clone())
                                .or_else(|| (x.norm_squared() > self.support(x)).then(|| x.clone()))
                        };
                        if lower > 1.0 || sep.is_some() {
                            return (
                                NormResult {
                                    value: upper,
                                    status: NormStatus::OutsideByEstimate,
                                    certificate: Some(sep.map_or(Certificate::Coefficients(t), Certificate::Functional)),
                                },
                                None,
                            );
                        }
                    }
                } else if !exact_outside {
                    return (
                        NormResult { value: f64::INFINITY, status: NormStatus::OutsideByEstimate, certificate: None },
                        None,
                    );
                }
                self.exact(x, warm)
            }
        }
    }
}
