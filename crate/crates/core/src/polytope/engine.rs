use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::balancing::{compute_balancing, compute_q, effective_horizon, Balancing, BalancingProblem, Role, EXTRA_TARGET, NEARLY_FACTOR};
use super::candidates::{compute_extra_vertices, compute_extra_vertices_cone, CandidateSet};
use super::selection::{natural_selection, Pending, SelectionOptions, Strategy};
use crate::bounds::JsrBounds;
use crate::error::{JsrError, Result};
use crate::linalg;
use crate::lp::{HullKind, LpBasis};
use crate::matrixset::{MatrixSet, ProductWord};
use crate::norms::{FrozenHull, NormResult, NormStatus, PolytopeVertices, VertexMeta};

/// Children within this relative distance of an existing vertex are
/// treated as that vertex.
pub const DEDUP_TOL: f64 = 1e-9;
/// Relative slack before an intermediate word counts as better.
pub const RESTART_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EngineOptions {
    /// Safety factor; `1` asks for the exact value.
    pub delta: f64,
    pub epsilon: f64,
    /// Relative singular value threshold for extra vertices.
    pub extra_threshold: f64,
    pub add_extra_vertices: bool,
    /// Word length limit for the balancing suprema.
    pub horizon: usize,
    pub max_iterations: usize,
    pub max_vertices: usize,
    pub time_limit: Option<Duration>,
    pub selection: SelectionOptions,
    /// One factor per s.m.p. and nearly-s.m.p. tree, in that order.
    pub balancing: Option<Vec<f64>>,
    /// Run the LP for points the estimates already place outside.
    pub exact_outside: bool,
    pub restart_check: bool,
    /// Longest intermediate word whose spectral radius is tested.
    pub restart_max_len: usize,
    /// Stop once this many vertices were added without `b` improving.
    pub growth_budget: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            delta: 1.0,
            epsilon: 1e-10,
            extra_threshold: 0.1,
            add_extra_vertices: true,
            horizon: 10,
            max_iterations: 500,
            max_vertices: 100_000,
            time_limit: None,
            selection: SelectionOptions::default(),
            balancing: None,
            exact_outside: false,
            restart_check: true,
            restart_max_len: 256,
            growth_budget: 50_000,
        }
    }
}

impl EngineOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(JsrError::InvalidOption(m));
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon must lie in [0, 0.5), got {}", self.epsilon));
        }
        if !(self.extra_threshold >= 0.0 && self.extra_threshold < 1.0) {
            return bad(format!("extra-vertex threshold must lie in [0, 1), got {}", self.extra_threshold));
        }
        if let Some(a) = &self.balancing {
            if a.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad("balancing factors must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    /// Every child was absorbed.
    Converged,
    IterationCap,
    VertexCap,
    TimeLimit,
    /// The polytope kept growing without the bound improving.
    GrowthBudget,
    /// An intermediate product beats the candidates.
    Restart { word: String, rho: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub vertices: usize,
    pub selected: usize,
    pub added: usize,
    pub b: f64,
    pub lower: f64,
    pub upper: f64,
    pub lp_calls: usize,
    pub estimated: usize,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone)]
pub struct EngineOutcome {
    pub bounds: JsrBounds,
    /// Final vertices, living in the space of `scaled_set`.
    pub polytope: PolytopeVertices,
    /// `delta / rho_c` times the input set.
    pub scaled_set: MatrixSet,
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
    pub restart_word: Option<(ProductWord, f64)>,
    pub iterations: usize,
    pub balancing: Vec<f64>,
    pub balancing_infeasible: bool,
    pub extra_vertices: usize,
    pub lp_calls: usize,
    pub estimated: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct Vertex {
    x: DVector<f64>,
    parent: Option<(usize, usize)>,
    /// Upper bound on the norm of `x` in the polytope it was tested against.
    n: f64,
    /// Children not yet evaluated or absorbed.
    pending: usize,
    tree: usize,
    added: usize,
}

enum Eval {
    Duplicate,
    Norm(NormResult),
}

/// Spectral radius test on intermediate words.
pub fn restart_check(mats: &[DMatrix<f64>], words: &[ProductWord], rho_c: f64) -> Option<(ProductWord, f64)> {
    let mut best: Option<(ProductWord, f64)> = None;
    for w in words {
        if w.is_empty() {
            continue;
        }
        let s = mats[0].nrows();
        let mut p = DMatrix::identity(s, s);
        for &j in &w.indices {
            p = &mats[j] * p;
        }
        let Ok(r) = linalg::spectral_radius(&p) else { continue };
        let r = r.powf(1.0 / w.len() as f64);
        if r > rho_c * (1.0 + RESTART_TOL) && best.as_ref().is_none_or(|b| r > b.1) {
            best = Some((w.canonical(), r));
        }
    }
    best
}

fn is_duplicate(kind: HullKind, x: &DVector<f64>, v: &DVector<f64>) -> bool {
    let scale = x.amax().max(v.amax());
    let tol = DEDUP_TOL * scale;
    let close = |sign: f64| x.iter().zip(v.iter()).all(|(a, b)| (a - sign * b).abs() <= tol);
    close(1.0) || (kind == HullKind::Symmetrized && close(-1.0))
}

struct Run<'a> {
    mats: Vec<DMatrix<f64>>,
    unscaled: &'a [DMatrix<f64>],
    verts: Vec<Vertex>,
    queue: Vec<Pending>,
    opts: &'a EngineOptions,
    rho_c: f64,
}

impl Run<'_> {
    fn word_of(&self, mut v: usize) -> ProductWord {
        let mut idx = Vec::new();
        while let Some((p, j)) = self.verts[v].parent {
            idx.push(j);
            v = p;
        }
        idx.reverse();
        ProductWord::new(idx)
    }

    fn depth(&self, mut v: usize) -> usize {
        let mut d = 0;
        while let Some((p, _)) = self.verts[v].parent {
            d += 1;
            v = p;
        }
        d
    }

    fn child(&self, p: &Pending) -> DVector<f64> {
        &self.mats[p.matrix] * &self.verts[p.parent].x
    }

    fn push_vertex(&mut self, v: Vertex, skip: Option<usize>, born: usize) {
        let id = self.verts.len();
        let j = self.mats.len();
        let mut pending = 0;
        for m in 0..j {
            if Some(m) != skip {
                self.queue.push(Pending { parent: id, matrix: m, born });
                pending += 1;
            }
        }
        self.verts.push(Vertex { pending, ..v });
    }

    fn b_candidate(&self) -> f64 {
        let eps = self.opts.epsilon;
        self.verts.iter().filter(|v| v.pending > 0).map(|v| v.n / (1.0 - eps)).fold(1.0, f64::max)
    }
}

/// The invariant polytope iteration on `set` with the given candidates.
pub fn run(set: &MatrixSet, candidates: &CandidateSet, kind: HullKind, opts: &EngineOptions) -> Result<EngineOutcome> {
    opts.validate()?;
    let start = Instant::now();
    let unscaled = set.scaled_matrices();
    let rho_c = candidates.rho_c;
    let delta = opts.delta;
    let scaled_set = set.scaled(delta / rho_c)?;
    let mats = scaled_set.scaled_matrices();
    let jn = mats.len();
    let mut warnings = Vec::new();

    if kind == HullKind::Cone && !set.is_nonnegative() {
        return Err(JsrError::InvalidOption("cone hull needs nonnegative matrices".into()));
    }

    // cyclic trees
    let cands: Vec<_> = candidates.all().collect();
    let n_smp = candidates.smps.len();
    let mut trees: Vec<Vec<DVector<f64>>> = Vec::new();
    for c in &cands {
        let roots = c.roots(&unscaled)?;
        if kind == HullKind::Cone && roots.iter().any(|r| r.iter().any(|&x| x < 0.0)) {
            return Err(JsrError::InvalidOption(format!("leading eigenvector of {} is not nonnegative", c.word)));
        }
        trees.push(roots);
    }
    let all_roots: Vec<DVector<f64>> = trees.iter().flatten().cloned().collect();
    let extras = if opts.add_extra_vertices {
        match kind {
            HullKind::Symmetrized => compute_extra_vertices(&all_roots, opts.extra_threshold),
            HullKind::Cone => compute_extra_vertices_cone(&all_roots, opts.extra_threshold),
        }
    } else {
        Vec::new()
    };
    let n_extra = extras.len();
    for e in &extras {
        trees.push(vec![e.clone()]);
    }

    // balancing
    let n_trees = trees.len();
    let mut roles = vec![Role::Smp; n_smp];
    roles.extend(std::iter::repeat_n(Role::Nearly, candidates.nearly.len()));
    roles.extend(std::iter::repeat_n(Role::Extra, n_extra));
    let mut alpha = vec![1.0; n_trees];
    let mut balancing_infeasible = false;
    let needs_q = delta >= 1.0 && n_trees > 1;
    if needs_q {
        let unit: Vec<DMatrix<f64>> = unscaled.iter().map(|a| a / rho_c).collect();
        let mut duals: Vec<Option<DVector<f64>>> = cands.iter().map(|c| c.dual.clone()).collect();
        for d in duals.iter_mut().skip(n_smp) {
            *d = None;
        }
        duals.resize(n_trees, None);
        let h = effective_horizon(jn, opts.horizon);
        if h < opts.horizon {
            warnings.push(format!("balancing horizon shortened to {h}"));
        }
        let q = compute_q(&unit, &trees, &duals, h);
        let targets: Vec<f64> = (0..n_trees)
            .map(|i| match roles[i] {
                Role::Smp => 0.0,
                Role::Nearly => NEARLY_FACTOR * cands[i].rho / rho_c,
                Role::Extra => EXTRA_TARGET,
            })
            .collect();
        let problem = BalancingProblem { q, roles: roles.clone(), horizon: h, targets };
        match &opts.balancing {
            Some(manual) => {
                if manual.len() != cands.len() {
                    return Err(JsrError::InvalidOption(format!(
                        "{} balancing factors given, {} trees need them",
                        manual.len(),
                        cands.len()
                    )));
                }
                alpha[..cands.len()].copy_from_slice(manual);
                for i in cands.len()..n_trees {
                    let a = (0..n_smp)
                        .filter(|&j| problem.q[(i, j)] > 0.0)
                        .map(|j| problem.targets[i] * alpha[j] / problem.q[(i, j)])
                        .fold(f64::INFINITY, f64::min);
                    alpha[i] = if a.is_finite() { a } else { 1.0 };
                }
            }
            None => match compute_balancing(&problem) {
                Balancing::Factors(a) => alpha = a,
                Balancing::Infeasible => {
                    balancing_infeasible = true;
                    warnings.push("balancing infeasible, using factors 1".into());
                }
            },
        }
    } else if let Some(manual) = &opts.balancing {
        if delta >= 1.0 {
            alpha[..manual.len().min(n_trees)].copy_from_slice(&manual[..manual.len().min(n_trees)]);
        }
    }

    let mut st = Run { mats, unscaled: &unscaled, verts: Vec::new(), queue: Vec::new(), opts, rho_c };
    for (t, roots) in trees.iter().enumerate() {
        let cyc = (t < cands.len()).then(|| &cands[t].word.indices);
        for (i, r) in roots.iter().enumerate() {
            let skip = cyc.map(|w| w[i]);
            let v = Vertex { x: r * alpha[t], parent: None, n: f64::INFINITY, pending: 0, tree: t, added: 0 };
            st.push_vertex(v, skip, 0);
        }
    }

    let eps = opts.epsilon;
    let mut b = f64::INFINITY;
    let mut trace = Vec::new();
    let termination;
    let mut restart_word = None;
    let mut lp_calls = 0;
    let mut estimated = 0;
    let mut since_drop = 0usize;
    let mut last_pinv: Option<DMatrix<f64>> = None;
    let mut functionals: Vec<DVector<f64>> = candidates.smps.iter().filter_map(|c| c.dual.clone()).collect();
    if kind == HullKind::Cone {
        functionals.retain(|w| w.iter().all(|&x| x >= 0.0));
    }
    let mut k = 0;
    loop {
        if st.queue.is_empty() {
            termination = Termination::Converged;
            break;
        }
        if k >= opts.max_iterations {
            termination = Termination::IterationCap;
            break;
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            termination = Termination::TimeLimit;
            break;
        }
        if st.verts.len() >= opts.max_vertices {
            termination = Termination::VertexCap;
            break;
        }

        // selection
        let batch = opts.selection.batch(st.queue.len(), jn);
        let scores: Vec<f64> = if st.queue.len() > batch {
            match opts.selection.strategy(k) {
                Strategy::NormEstimate => st
                    .queue
                    .par_iter()
                    .map(|p| {
                        let x = st.child(p);
                        match &last_pinv {
                            Some(pi) => (pi * x).norm(),
                            None => x.norm(),
                        }
                    })
                    .collect(),
                Strategy::ParentNorm => st.queue.iter().map(|p| st.verts[p.parent].n).collect(),
            }
        } else {
            Vec::new()
        };
        let chosen = natural_selection(&st.queue, &scores, k, batch, opts.selection.age_threshold);
        let mut mark = vec![false; st.queue.len()];
        for &i in &chosen {
            mark[i] = true;
        }
        let mut selected: Vec<Pending> = Vec::with_capacity(chosen.len());
        let mut rest = Vec::with_capacity(st.queue.len() - chosen.len());
        for (i, p) in st.queue.drain(..).enumerate() {
            if mark[i] {
                selected.push(p);
            } else {
                rest.push(p);
            }
        }
        st.queue = rest;
        selected.sort_by_key(|p| (p.parent, p.matrix));

        // frozen polytope: vertices all of whose children are known after
        // this phase
        let mut sel_count = vec![0usize; st.verts.len()];
        for p in &selected {
            sel_count[p.parent] += 1;
        }
        let w_idx: Vec<usize> = (0..st.verts.len()).filter(|&v| st.verts[v].pending == sel_count[v]).collect();
        let w_vecs: Vec<DVector<f64>> = w_idx.iter().map(|&v| st.verts[v].x.clone()).collect();
        let hull = FrozenHull::new(kind, &w_vecs).with_functionals(&functionals);

        // parallel norm phase, warm starts chained within sibling groups
        let mut groups: Vec<&[Pending]> = Vec::new();
        let mut lo = 0;
        for i in 1..=selected.len() {
            if i == selected.len() || selected[i].parent != selected[lo].parent {
                groups.push(&selected[lo..i]);
                lo = i;
            }
        }
        let verts = &st.verts;
        let st_ref = &st;
        let evals: Vec<Vec<(DVector<f64>, Eval)>> = groups
            .par_iter()
            .map(|g| {
                let mut warm: Option<LpBasis> = None;
                g.iter()
                    .map(|p| {
                        let x = st_ref.child(p);
                        if verts.iter().any(|v| is_duplicate(kind, &x, &v.x)) {
                            return (x, Eval::Duplicate);
                        }
                        let (r, basis) = hull.estimate(&x, 1.0 - eps, opts.exact_outside, warm.as_ref());
                        if basis.is_some() {
                            warm = basis;
                        }
                        (x, Eval::Norm(r))
                    })
                    .collect()
            })
            .collect();

        // commit
        let before = st.verts.len();
        let mut added = 0;
        let mut new_ids = Vec::new();
        let mut iter_lp = 0;
        let mut iter_est = 0;
        for (p, (x, e)) in selected.iter().zip(evals.into_iter().flatten()) {
            st.verts[p.parent].pending -= 1;
            let r = match e {
                Eval::Duplicate => continue,
                Eval::Norm(r) => r,
            };
            match r.status {
                NormStatus::Exact | NormStatus::UpperBoundOnly => iter_lp += 1,
                _ => iter_est += 1,
            }
            if r.value > 1.0 - eps {
                if st.verts[before..].iter().any(|v| is_duplicate(kind, &x, &v.x)) {
                    continue;
                }
                if kind == HullKind::Cone && x.iter().any(|&c| c < -1e-14) {
                    return Err(JsrError::InvalidOption("cone iteration produced a negative vector".into()));
                }
                let tree = st.verts[p.parent].tree;
                let v = Vertex { x, parent: Some((p.parent, p.matrix)), n: r.value, pending: 0, tree, added: k + 1 };
                st.push_vertex(v, None, k + 1);
                new_ids.push(st.verts.len() - 1);
                added += 1;
            }
        }
        lp_calls += iter_lp;
        estimated += iter_est;
        last_pinv = (!w_vecs.is_empty()).then(|| hull.pinv().clone());

        let b_old = b;
        b = b.min(st.b_candidate());
        if b < b_old {
            since_drop = 0;
        } else {
            since_drop += added;
        }
        trace.push(TraceRow {
            iteration: k + 1,
            vertices: before,
            selected: selected.len(),
            added,
            b,
            lower: rho_c,
            upper: b * rho_c / delta,
            lp_calls: iter_lp,
            estimated: iter_est,
            elapsed_ms: start.elapsed().as_millis(),
        });
        k += 1;

        if opts.restart_check {
            let words: Vec<ProductWord> = new_ids
                .iter()
                .filter(|&&v| st.depth(v) <= opts.restart_max_len)
                .map(|&v| st.word_of(v))
                .collect();
            if let Some((w, r)) = restart_check(st.unscaled, &words, st.rho_c) {
                termination = Termination::Restart { word: w.plain(), rho: r };
                restart_word = Some((w, r));
                break;
            }
        }
        if since_drop > opts.growth_budget {
            termination = Termination::GrowthBudget;
            warnings.push(format!("{since_drop} vertices added without improving the bound"));
            break;
        }
    }

    let converged = termination == Termination::Converged;
    if converged {
        b = 1.0;
    }
    let exact = converged && delta >= 1.0;
    let upper = if exact { rho_c } else { b * rho_c / delta };
    let meta: Vec<VertexMeta> = (0..st.verts.len())
        .map(|v| VertexMeta {
            parent: st.verts[v].parent.map(|_| st.word_of(v)),
            iteration: st.verts[v].added,
            alpha: alpha[st.verts[v].tree],
            essential: true,
        })
        .collect();
    let vertex_count = st.verts.len();
    let polytope = PolytopeVertices { kind, vertices: st.verts.into_iter().map(|v| v.x).collect(), meta };
    let mut lower = rho_c;
    if let Some((_, r)) = &restart_word {
        lower = lower.max(*r);
    }
    let bounds = JsrBounds {
        lower,
        upper: upper.max(lower),
        exact,
        words: candidates.smps.iter().map(|c| c.word.clone()).collect(),
        vertex_count,
    };
    Ok(EngineOutcome {
        bounds,
        polytope,
        scaled_set,
        trace,
        termination,
        restart_word,
        iterations: k,
        balancing: alpha,
        balancing_infeasible,
        extra_vertices: n_extra,
        lp_calls,
        estimated,
        warnings,
    })
}
