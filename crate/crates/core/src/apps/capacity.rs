//! Capacity of codes avoiding forbidden difference patterns.
//!
//! A pattern of length `m` forbids two admissible windows `u, v` in
//! `{0,1}^m` whose difference matches it. Each way of resolving the
//! conflicts (a maximal conflict-free window set) yields one 0/1 transfer
//! matrix on the `2^(m-1)` overlapping states.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{JsrError, Result};
use crate::matrixset::MatrixSet;

/// Sets larger than this are refused rather than enumerated.
pub const MAX_CAPACITY_MATRICES: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Zero,
    Plus,
    Minus,
    PlusMinus,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DifferencePattern {
    pub symbols: Vec<Symbol>,
}

impl DifferencePattern {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Does `u - v` match the pattern position-wise?
    fn matches(&self, u: usize, v: usize) -> bool {
        let m = self.len();
        self.symbols.iter().enumerate().all(|(k, s)| {
            let bu = (u >> (m - 1 - k)) & 1;
            let bv = (v >> (m - 1 - k)) & 1;
            match s {
                Symbol::Zero => bu == bv,
                Symbol::Plus => bu == 1 && bv == 0,
                Symbol::Minus => bu == 0 && bv == 1,
                Symbol::PlusMinus => bu != bv,
            }
        })
    }
}

impl FromStr for DifferencePattern {
    type Err = JsrError;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .map(|c| match c {
                'o' | '0' => Ok(Symbol::Zero),
                '+' => Ok(Symbol::Plus),
                '-' => Ok(Symbol::Minus),
                'p' | '±' => Ok(Symbol::PlusMinus),
                other => Err(JsrError::UnsupportedPattern(format!("unknown symbol `{other}` in `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if symbols.is_empty() {
            return Err(JsrError::UnsupportedPattern("empty pattern".into()));
        }
        if symbols.iter().all(|s| *s == Symbol::Zero) {
            return Err(JsrError::UnsupportedPattern(format!("`{s}` forbids nothing")));
        }
        Ok(Self { symbols })
    }
}

impl fmt::Display for DifferencePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            let c = match s {
                Symbol::Zero => 'o',
                Symbol::Plus => '+',
                Symbol::Minus => '-',
                Symbol::PlusMinus => 'p',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn conflict_graph(patterns: &[DifferencePattern], m: usize) -> Vec<Vec<usize>> {
    let n = 1usize << m;
    let mut adj = vec![BTreeSet::new(); n];
    for p in patterns {
        for u in 0..n {
            for v in 0..n {
                if u != v && p.matches(u, v) {
                    adj[u].insert(v);
                    adj[v].insert(u);
                }
            }
        }
    }
    adj.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Maximal independent sets, Bron–Kerbosch with pivoting on the
/// complement. Isolated vertices belong to every set.
fn maximal_independent_sets(adj: &[Vec<usize>], cap: usize) -> Result<Vec<Vec<usize>>> {
    let n = adj.len();
    let nonadj = |a: usize, b: usize| a != b && adj[a].binary_search(&b).is_err();
    let mut out = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn bk(
        r: &mut Vec<usize>,
        p: Vec<usize>,
        x: Vec<usize>,
        nonadj: &dyn Fn(usize, usize) -> bool,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> Result<()> {
        if p.is_empty() && x.is_empty() {
            if out.len() >= cap {
                return Err(JsrError::BudgetExceeded { needed: cap as u128 + 1, budget: cap as u128 });
            }
            let mut s = r.clone();
            s.sort_unstable();
            out.push(s);
            return Ok(());
        }
        let pivot = *p.iter().chain(x.iter()).max_by_key(|&&u| p.iter().filter(|&&v| nonadj(u, v)).count()).unwrap();
        let cand: Vec<usize> = p.iter().copied().filter(|&v| !nonadj(pivot, v)).collect();
        let (mut p, mut x) = (p, x);
        for v in cand {
            r.push(v);
            let np = p.iter().copied().filter(|&w| nonadj(v, w)).collect();
            let nx = x.iter().copied().filter(|&w| nonadj(v, w)).collect();
            bk(r, np, nx, nonadj, out, cap)?;
            r.pop();
            p.retain(|&w| w != v);
            x.push(v);
        }
        Ok(())
    }
    bk(&mut Vec::new(), (0..n).collect(), Vec::new(), &nonadj, &mut out, cap)?;
    out.sort();
    Ok(out)
}

/// Transfer matrices for a set of patterns of equal length.
pub fn capacity_matrices(patterns: &[DifferencePattern]) -> Result<MatrixSet> {
    let m = patterns.first().ok_or_else(|| JsrError::UnsupportedPattern("no patterns".into()))?.len();
    if patterns.iter().any(|p| p.len() != m) {
        return Err(JsrError::UnsupportedPattern("patterns must have equal length".into()));
    }
    if m > 12 {
        return Err(JsrError::UnsupportedPattern(format!("pattern length {m} too large")));
    }
    let adj = conflict_graph(patterns, m);
    let sets = maximal_independent_sets(&adj, MAX_CAPACITY_MATRICES)?;
    let states = 1usize << (m - 1);
    let mask = states - 1;
    let mats = sets
        .iter()
        .map(|s| {
            let mut a = DMatrix::zeros(states, states);
            for &w in s {
                let x = w >> 1;
                let y = w & mask;
                a[(y, x)] = 1.0;
            }
            a
        })
        .collect();
    MatrixSet::new(mats)
}

/// `log2` applied endpoint-wise to JSR bounds.
pub fn capacity_from_jsr(lower: f64, upper: f64) -> (f64, f64) {
    (lower.log2(), upper.log2())
}
