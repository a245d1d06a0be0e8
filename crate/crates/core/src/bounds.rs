use serde::Serialize;

use crate::matrixset::ProductWord;

/// Certified enclosure of the joint spectral radius.
#[derive(Debug, Clone, Serialize)]
pub struct JsrBounds {
    pub lower: f64,
    pub upper: f64,
    /// Set only when the upper bound was closed by an invariant polytope
    /// built without a safety factor.
    pub exact: bool,
    #[serde(serialize_with = "ser_words")]
    pub words: Vec<ProductWord>,
    pub vertex_count: usize,
}

fn ser_words<S: serde::Serializer>(words: &[ProductWord], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(words.iter().map(|w| w.plain()))
}

impl JsrBounds {
    pub fn ratio(&self) -> f64 {
        self.upper / self.lower
    }

    pub fn contains(&self, x: f64, rel_tol: f64) -> bool {
        x >= self.lower * (1.0 - rel_tol) && x <= self.upper * (1.0 + rel_tol)
    }
}
