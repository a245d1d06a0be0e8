//! Tree searches for lower bounds and s.m.p. candidates.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::JsrBounds;
use crate::error::{JsrError, Result};
use crate::linalg;
use crate::matrixset::{MatrixSet, ProductWord};

/// Relative slack when comparing normalized spectral radii for equality.
const RHO_TIE: f64 = 1e-12;
/// Only words this close to the running maximum are remembered as
/// possible nearly-s.m.p.s.
const NEAR_KEEP: f64 = 0.999;
const NEAR_CAP: usize = 512;

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub candidates: Vec<ProductWord>,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    /// Classic search only: the frontier emptied, so `upper_bound` carries
    /// the full accuracy guarantee.
    pub upper_final: bool,
    pub evaluations: u64,
    pub frontier_trace: Vec<usize>,
    /// Canonical words seen with high normalized spectral radius, best first.
    pub near: Vec<(ProductWord, f64)>,
}

struct Node {
    word: Vec<usize>,
    mat: DMatrix<f64>,
}

struct Child {
    node: Node,
    norm: f64,
    rho: f64,
}

/// Power-of-two rescaling keeps long products in range without touching
/// the mantissas.
fn pow2_scale(set: &MatrixSet) -> f64 {
    let m = set.matrices().iter().map(linalg::norm2).fold(0.0, f64::max);
    if m > 0.0 {
        2f64.powi(m.log2().round() as i32)
    } else {
        1.0
    }
}

struct Tree {
    mats: Vec<DMatrix<f64>>,
    sigma: f64,
}

impl Tree {
    fn new(set: &MatrixSet) -> Self {
        let sigma = pow2_scale(set);
        Self { mats: set.matrices().iter().map(|m| m / sigma).collect(), sigma }
    }

    fn root(&self) -> Node {
        let s = self.mats[0].nrows();
        Node { word: Vec::new(), mat: DMatrix::identity(s, s) }
    }

    /// All children of `frontier`, with normalized norm and spectral radius.
    fn expand(&self, frontier: &[Node]) -> Result<Vec<Child>> {
        let jn = self.mats.len();
        let sigma = self.sigma;
        frontier
            .par_iter()
            .flat_map_iter(|node| (0..jn).map(move |j| (node, j)))
            .map(|(node, j)| {
                let mat = &self.mats[j] * &node.mat;
                let d = (node.word.len() + 1) as f64;
                let norm = linalg::norm2(&mat).powf(1.0 / d) * sigma;
                let rho = linalg::spectral_radius(&mat)?.powf(1.0 / d) * sigma;
                let mut word = Vec::with_capacity(node.word.len() + 1);
                word.extend_from_slice(&node.word);
                word.push(j);
                Ok(Child { node: Node { word, mat }, norm, rho })
            })
            .collect()
    }
}

#[derive(Default)]
struct Tracker {
    r: f64,
    cands: Vec<Vec<usize>>,
    near: BTreeMap<Vec<usize>, f64>,
}

impl Tracker {
    fn absorb(&mut self, children: &[Child]) {
        let maxrho = children.iter().map(|c| c.rho).fold(0.0, f64::max);
        if maxrho > self.r * (1.0 + RHO_TIE) {
            self.cands.clear();
        }
        self.r = self.r.max(maxrho);
        let r = self.r;
        for c in children {
            if c.rho >= r * (1.0 - RHO_TIE) {
                self.cands.push(c.node.word.clone());
            }
            if c.rho >= NEAR_KEEP * r && c.rho > 0.0 {
                let key = ProductWord::new(c.node.word.clone()).canonical().indices;
                let e = self.near.entry(key).or_insert(0.0);
                *e = e.max(c.rho);
            }
        }
        if self.near.len() > NEAR_CAP {
            let cut = NEAR_KEEP * r;
            self.near.retain(|_, v| *v >= cut);
            if self.near.len() > NEAR_CAP {
                let mut vals: Vec<f64> = self.near.values().copied().collect();
                vals.sort_by(|a, b| b.total_cmp(a));
                let cut = vals[NEAR_CAP - 1];
                self.near.retain(|_, v| *v >= cut);
            }
        }
    }

    fn report(self, set: &MatrixSet, evaluations: u64, trace: Vec<usize>) -> Result<SearchReport> {
        let mut canon: Vec<ProductWord> = self.cands.into_iter().map(|w| ProductWord::new(w).canonical()).collect();
        canon.sort_by(|a, b| (a.len(), &a.indices).cmp(&(b.len(), &b.indices)));
        canon.dedup();
        let mut scored = Vec::with_capacity(canon.len());
        for mut w in canon {
            let rho = set.normalized_spectral_radius(&w)?;
            w.cached_spectral_radius = Some(rho);
            scored.push((w, rho));
        }
        let best = scored.iter().map(|(_, r)| *r).fold(0.0, f64::max);
        let candidates: Vec<ProductWord> =
            scored.into_iter().filter(|(_, r)| *r >= best * (1.0 - 1e-10)).map(|(w, _)| w).collect();
        let mut near: Vec<(ProductWord, f64)> = self
            .near
            .into_iter()
            .filter(|(_, r)| *r >= NEAR_KEEP * best)
            .map(|(w, r)| (ProductWord::new(w), r))
            .collect();
        near.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.indices.cmp(&b.0.indices)));
        Ok(SearchReport {
            candidates,
            lower_bound: best,
            upper_bound: None,
            upper_final: false,
            evaluations,
            frontier_trace: trace,
            near,
        })
    }
}

enum Selection {
    Extremes,
    Random(Box<ChaCha8Rng>),
}

fn modified_impl(set: &MatrixSet, n: usize, depth: usize, mut sel: Selection) -> Result<SearchReport> {
    if n == 0 || depth == 0 {
        return Err(JsrError::InvalidOption("N and D must be positive".into()));
    }
    let tree = Tree::new(set);
    let mut frontier = vec![tree.root()];
    let mut tr = Tracker::default();
    let mut evaluations = 0u64;
    let mut trace = Vec::with_capacity(depth);
    for _d in 1..=depth {
        let mut children = tree.expand(&frontier)?;
        evaluations += children.len() as u64;
        tr.absorb(&children);
        let r = tr.r;
        children.retain(|c| c.norm >= r);
        children.sort_by(|a, b| a.norm.total_cmp(&b.norm).then_with(|| a.node.word.cmp(&b.node.word)));
        if children.len() > 2 * n {
            let len = children.len();
            children = match &mut sel {
                Selection::Extremes => {
                    let mut kept: Vec<Child> = Vec::with_capacity(2 * n);
                    for (i, c) in children.into_iter().enumerate() {
                        if i < n || i >= len - n {
                            kept.push(c);
                        }
                    }
                    kept
                }
                Selection::Random(rng) => {
                    let mut idx = rand::seq::index::sample(rng, len, 2 * n).into_vec();
                    idx.sort_unstable();
                    let mut keep = vec![false; len];
                    for i in idx {
                        keep[i] = true;
                    }
                    children.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect()
                }
            };
        }
        trace.push(children.len());
        frontier = children.into_iter().map(|c| c.node).collect();
        if frontier.is_empty() {
            break;
        }
    }
    tr.report(set, evaluations, trace)
}

/// Keeps the `N` lowest and `N` highest norm products at every depth.
pub fn modified_gripenberg(set: &MatrixSet, n: usize, depth: usize) -> Result<SearchReport> {
    modified_impl(set, n, depth, Selection::Extremes)
}

/// Same as [`modified_gripenberg`] but the `2N` survivors are drawn at random.
pub fn random_modified_gripenberg(set: &MatrixSet, n: usize, depth: usize, seed: u64) -> Result<SearchReport> {
    modified_impl(set, n, depth, Selection::Random(Box::new(ChaCha8Rng::seed_from_u64(seed))))
}

#[derive(Debug, Clone)]
pub struct ClassicOptions {
    pub delta: f64,
    pub max_depth: usize,
    /// Stop (non-final) before a depth would hold more products than this.
    pub max_frontier: usize,
    pub time_limit: Option<Duration>,
}

impl Default for ClassicOptions {
    fn default() -> Self {
        Self { delta: 0.95, max_depth: 1000, max_frontier: 2_000_000, time_limit: None }
    }
}

/// Gripenberg's branch and bound: products are pruned once their normalized
/// norm drops below `b_-/delta`.
pub fn classic_gripenberg(set: &MatrixSet, opts: &ClassicOptions) -> Result<SearchReport> {
    let delta = opts.delta;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(JsrError::InvalidOption(format!("delta must lie in (0, 1], got {delta}")));
    }
    let start = Instant::now();
    let tree = Tree::new(set);
    let jn = set.count();
    let mut tr = Tracker::default();
    let first = tree.expand(&[tree.root()])?;
    let mut evaluations = first.len() as u64;
    tr.absorb(&first);
    let mut frontier: Vec<Child> = first;
    let mut trace = vec![frontier.len()];
    let mut upper = f64::INFINITY;
    let mut final_ = false;
    for k in 1.. {
        let top = frontier.iter().map(|c| c.norm).fold(0.0, f64::max);
        upper = upper.min(top.max(tr.r / delta));
        if frontier.is_empty() {
            final_ = true;
            break;
        }
        let over_time = opts.time_limit.is_some_and(|t| start.elapsed() >= t);
        if k >= opts.max_depth || frontier.len().saturating_mul(jn) > opts.max_frontier || over_time {
            break;
        }
        let nodes: Vec<Node> = frontier.into_iter().map(|c| c.node).collect();
        let children = tree.expand(&nodes)?;
        evaluations += children.len() as u64;
        tr.absorb(&children);
        let cut = tr.r / delta;
        frontier = children.into_iter().filter(|c| c.norm >= cut).collect();
        trace.push(frontier.len());
    }
    let mut rep = tr.report(set, evaluations, trace)?;
    rep.upper_bound = Some(upper.max(rep.lower_bound));
    rep.upper_final = final_;
    Ok(rep)
}

/// Exhaustive enumeration of all words up to length `k`.
pub fn brute_force_bounds(set: &MatrixSet, k: usize, budget: u128) -> Result<JsrBounds> {
    if k == 0 {
        return Err(JsrError::InvalidOption("depth must be positive".into()));
    }
    let jn = set.count() as u128;
    let mut needed: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..k {
        layer = layer.saturating_mul(jn);
        needed = needed.saturating_add(layer);
    }
    if needed > budget {
        return Err(JsrError::BudgetExceeded { needed, budget });
    }
    let tree = Tree::new(set);
    let js: Vec<usize> = (0..set.count()).collect();
    // per first letter: (max norm per length, best rho, best word)
    let parts: Vec<(Vec<f64>, f64, Vec<usize>)> = js
        .par_iter()
        .map(|&j0| {
            let mut maxnorm = vec![0.0f64; k];
            let mut best = (-1.0f64, Vec::new());
            let mut stack: Vec<(Vec<usize>, DMatrix<f64>)> = vec![(vec![j0], tree.mats[j0].clone())];
            while let Some((word, mat)) = stack.pop() {
                let d = word.len();
                let norm = linalg::norm2(&mat).powf(1.0 / d as f64) * tree.sigma;
                let rho = linalg::spectral_radius(&mat).unwrap_or(f64::NAN).powf(1.0 / d as f64) * tree.sigma;
                maxnorm[d - 1] = maxnorm[d - 1].max(norm);
                if rho > best.0 || (rho == best.0 && word < best.1) || rho.is_nan() {
                    best = (rho, word.clone());
                }
                if d < k {
                    for j in (0..tree.mats.len()).rev() {
                        let mut w = word.clone();
                        w.push(j);
                        stack.push((w, &tree.mats[j] * &mat));
                    }
                }
            }
            (maxnorm, best.0, best.1)
        })
        .collect();
    let mut maxnorm = vec![0.0f64; k];
    let mut best = (-1.0f64, Vec::new());
    for (mn, r, w) in parts {
        if r.is_nan() {
            return Err(JsrError::NoConvergence);
        }
        for (a, b) in maxnorm.iter_mut().zip(mn) {
            *a = a.max(b);
        }
        if r > best.0 {
            best = (r, w);
        }
    }
    let upper = maxnorm.iter().copied().fold(f64::INFINITY, f64::min);
    let word = ProductWord::new(best.1).canonical();
    let lower = set.normalized_spectral_radius(&word)?;
    Ok(JsrBounds { lower, upper: upper.max(lower), exact: false, words: vec![word], vertex_count: 0 })
}
