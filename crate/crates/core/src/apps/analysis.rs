//! Regularity and capacity on top of the JSR pipeline.

use serde::Serialize;

use super::capacity::{capacity_from_jsr, capacity_matrices, DifferencePattern};
use super::subdivision::{transition_matrices, SubdivisionScheme};
use crate::bounds::JsrBounds;
use crate::error::Result;
use crate::matrixset::MatrixSet;
use crate::pipeline::{compute_jsr, PipelineOptions, PipelineReport};

/// `-log_|m|` applied to both ends; the interval comes out ordered.
/// A vanishing JSR maps to `+inf`.
pub fn holder_from_jsr(lower: f64, upper: f64, dilation: i64) -> (f64, f64) {
    let base = (dilation.unsigned_abs() as f64).ln();
    let f = |r: f64| if r <= 0.0 { f64::INFINITY } else { -r.ln() / base };
    (f(upper), f(lower))
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityResult {
    pub holder: (f64, f64),
    pub jsr: JsrBounds,
    #[serde(skip)]
    pub matrices: Option<MatrixSet>,
    #[serde(skip)]
    pub report: Option<PipelineReport>,
}

impl RegularityResult {
    pub fn is_exact(&self) -> bool {
        self.jsr.exact
    }
}

/// Hölder exponent of the refinable function of `scheme`, from the
/// transition matrices restricted to differences of order `order`.
pub fn regularity(scheme: &SubdivisionScheme, order: usize, opts: &PipelineOptions) -> Result<RegularityResult> {
    let tm = transition_matrices(scheme, order)?;
    let Some(set) = tm.restricted else {
        let jsr = JsrBounds { lower: 0.0, upper: 0.0, exact: true, words: Vec::new(), vertex_count: 0 };
        return Ok(RegularityResult { holder: (f64::INFINITY, f64::INFINITY), jsr, matrices: None, report: None });
    };
    if set.matrices().iter().all(|m| m.iter().all(|&x| x == 0.0)) {
        let jsr = JsrBounds { lower: 0.0, upper: 0.0, exact: true, words: Vec::new(), vertex_count: 0 };
        return Ok(RegularityResult { holder: (f64::INFINITY, f64::INFINITY), jsr, matrices: Some(set), report: None });
    }
    let report = compute_jsr(&set, opts)?;
    let jsr = report.bounds.clone();
    Ok(RegularityResult {
        holder: holder_from_jsr(jsr.lower, jsr.upper, scheme.dilation),
        jsr,
        matrices: Some(set),
        report: Some(report),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub capacity: (f64, f64),
    pub jsr: JsrBounds,
    pub count: usize,
    pub dim: usize,
    #[serde(skip)]
    pub report: Option<PipelineReport>,
}

pub fn capacity(patterns: &[DifferencePattern], opts: &PipelineOptions) -> Result<CapacityResult> {
    let set = capacity_matrices(patterns)?;
    let report = compute_jsr(&set, opts)?;
    let jsr = report.bounds.clone();
    Ok(CapacityResult {
        capacity: capacity_from_jsr(jsr.lower, jsr.upper),
        jsr,
        count: set.count(),
        dim: set.dim(),
        report: Some(report),
    })
}
