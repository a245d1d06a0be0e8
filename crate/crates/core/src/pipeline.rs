//! Screening, candidate search and the polytope iteration chained together.

use crate::bounds::JsrBounds;
use crate::error::{JsrError, Result};
use crate::gripenberg::{brute_force_bounds, modified_gripenberg, SearchReport};
use crate::lp::HullKind;
use crate::matrixset::{MatrixSet, ProductWord};
use crate::polytope::{build_candidates, MAX_NEARLY, run, CandidateSet, EngineOptions, EngineOutcome, Termination};
use crate::preprocess::{classify_case, find_common_invariant_subspace, CaseTag, Heuristic, ReducibilityReport};

/// Safety factor used once the restart allowance is spent.
pub const FALLBACK_DELTA: f64 = 1.0 - 1e-9;
/// Word count allowed for the brute force upper bound fallback.
const BRUTE_BUDGET: u128 = 20_000;

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Survivors per level of the candidate search.
    pub search_n: usize,
    /// Depth of the candidate search.
    pub search_depth: usize,
    pub tau: f64,
    pub engine: EngineOptions,
    pub skip_reducibility: bool,
    pub max_restarts: usize,
    /// Replace the search by these s.m.p. candidates.
    pub candidates: Option<Vec<ProductWord>>,
    pub nearly: Option<Vec<ProductWord>>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            search_n: 20,
            search_depth: 100,
            tau: 0.9999,
            engine: EngineOptions::default(),
            skip_reducibility: false,
            max_restarts: 5,
            candidates: None,
            nearly: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub bounds: JsrBounds,
    pub case: CaseTag,
    pub kind: Option<HullKind>,
    pub reducibility: Option<ReducibilityReport>,
    pub search: Option<SearchReport>,
    /// Last engine run.
    pub outcome: Option<EngineOutcome>,
    pub restarts: usize,
    /// Per-block bounds when the set was split.
    pub blocks: Vec<JsrBounds>,
    pub warnings: Vec<String>,
}

fn brute_fallback(set: &MatrixSet) -> Option<JsrBounds> {
    let j = set.count() as u128;
    let mut k = 0;
    let mut total: u128 = 0;
    let mut layer: u128 = 1;
    while k < 12 {
        layer = layer.saturating_mul(j);
        if total.saturating_add(layer) > BRUTE_BUDGET {
            break;
        }
        total += layer;
        k += 1;
    }
    (k > 0).then(|| brute_force_bounds(set, k, BRUTE_BUDGET).ok()).flatten()
}

/// Certified bounds for the JSR of `set`, exact when the polytope closes.
pub fn compute_jsr(set: &MatrixSet, opts: &PipelineOptions) -> Result<PipelineReport> {
    opts.engine.validate()?;
    if !(opts.tau > 0.0 && opts.tau <= 1.0) {
        return Err(JsrError::InvalidOption(format!("tau must lie in (0, 1], got {}", opts.tau)));
    }
    let mut warnings = Vec::new();
    // explicit candidates refer to the full set, so it is not split
    if !opts.skip_reducibility && opts.candidates.is_none() {
        let red = find_common_invariant_subspace(set);
        // a change of basis would cost nonnegativity
        let keeps_sign = !set.is_nonnegative() || red.heuristic == Some(Heuristic::Permutation);
        if let Some(blocks) = red.blocks.clone().filter(|b| b.len() > 1 && keeps_sign) {
            let mut sub = opts.clone();
            sub.skip_reducibility = true;
            let mut reports = Vec::new();
            for b in &blocks {
                reports.push(compute_jsr(&chop(b, set)?, &sub)?);
            }
            return Ok(combine_blocks(reports, red));
        }
        if !red.irreducible {
            warnings.push(if keeps_sign {
                "invariant subspace found but the split failed".into()
            } else {
                "invariant subspace ignored to keep the set nonnegative".into()
            });
        }
        let mut rep = solve_irreducible(set, opts, warnings)?;
        rep.reducibility = Some(red);
        return Ok(rep);
    }
    solve_irreducible(set, opts, warnings)
}

/// Block entries at rounding level of the parent set become zero.
fn chop(block: &MatrixSet, parent: &MatrixSet) -> Result<MatrixSet> {
    let top = parent.matrices().iter().map(|m| m.amax()).fold(0.0, f64::max);
    let tol = 1e-13 * top.max(f64::MIN_POSITIVE);
    let mats = block.matrices().iter().map(|m| m.map(|x| if x.abs() < tol { 0.0 } else { x })).collect();
    MatrixSet::new(mats)?.scaled(block.scale())
}

fn combine_blocks(reports: Vec<PipelineReport>, red: ReducibilityReport) -> PipelineReport {
    let lower = reports.iter().map(|r| r.bounds.lower).fold(0.0, f64::max);
    let upper = reports.iter().map(|r| r.bounds.upper).fold(0.0, f64::max);
    // the JSR is the largest block value; it is pinned when every block is
    // either exact or dominated by the best lower bound
    let exact = reports.iter().all(|r| r.bounds.exact || r.bounds.upper <= lower) && upper <= lower;
    let best = reports
        .iter()
        .max_by(|a, b| a.bounds.lower.total_cmp(&b.bounds.lower))
        .expect("at least two blocks");
    let mut warnings: Vec<String> = reports.iter().flat_map(|r| r.warnings.clone()).collect();
    warnings.push(format!("set split into {} diagonal blocks", reports.len()));
    PipelineReport {
        bounds: JsrBounds {
            lower,
            upper: upper.max(lower),
            exact,
            words: best.bounds.words.clone(),
            vertex_count: reports.iter().map(|r| r.bounds.vertex_count).sum(),
        },
        case: best.case,
        kind: best.kind,
        reducibility: Some(red),
        search: best.search.clone(),
        outcome: best.outcome.clone(),
        restarts: reports.iter().map(|r| r.restarts).sum(),
        blocks: reports.iter().map(|r| r.bounds.clone()).collect(),
        warnings,
    }
}

/// Cone hull when every s.m.p. is in case P. Nearly candidates whose
/// leading eigenvector leaves the orthant are then dropped.
fn hull_for(set: &MatrixSet, cs: &mut CandidateSet) -> Result<(CaseTag, HullKind)> {
    let mut all_p = true;
    for c in &cs.smps {
        match classify_case(set, &c.eigen) {
            CaseTag::C => return Err(JsrError::ComplexLeading),
            CaseTag::R => all_p = false,
            CaseTag::P => {}
        }
    }
    if !all_p {
        return Ok((CaseTag::R, HullKind::Symmetrized));
    }
    cs.nearly.retain(|c| c.vector().is_ok_and(|v| v.iter().all(|&x| x >= 0.0)));
    Ok((CaseTag::P, HullKind::Cone))
}

fn solve_irreducible(set: &MatrixSet, opts: &PipelineOptions, mut warnings: Vec<String>) -> Result<PipelineReport> {
    let search = match &opts.candidates {
        Some(_) => None,
        None => Some(modified_gripenberg(set, opts.search_n, opts.search_depth)?),
    };
    let brute = brute_fallback(set);
    let search_lower = search.as_ref().map_or(0.0, |s| s.lower_bound);
    if opts.candidates.is_none() && search_lower <= 0.0 {
        // every product found is nilpotent; only the brute force bounds remain
        let b = brute.ok_or(JsrError::NoConvergence)?;
        let exact = b.upper <= 0.0;
        warnings.push("candidate spectral radii vanish".into());
        return Ok(PipelineReport {
            bounds: JsrBounds { exact, ..b },
            case: CaseTag::R,
            kind: None,
            reducibility: None,
            search,
            outcome: None,
            restarts: 0,
            blocks: Vec::new(),
            warnings,
        });
    }

    let mut cs = match (&opts.candidates, &search) {
        (Some(w), _) => CandidateSet::from_words(set, w, opts.nearly.as_deref().unwrap_or(&[]))?,
        (None, Some(s)) => build_candidates(set, s, opts.tau)?,
        (None, None) => unreachable!(),
    };
    let mut engine = opts.engine.clone();
    let mut restarts = 0;
    let mut best_lower = search_lower;
    let (case, kind, outcome) = loop {
        let (case, kind) = hull_for(set, &mut cs)?;
        let out = run(set, &cs, kind, &engine)?;
        best_lower = best_lower.max(out.bounds.lower);
        warnings.extend(out.warnings.iter().cloned());
        match (&out.termination, &out.restart_word) {
            (Termination::Restart { .. }, Some((w, r))) => {
                restarts += 1;
                warnings.push(format!("restart {restarts}: {} has normalized spectral radius {r}", w));
                if restarts > opts.max_restarts {
                    break (case, kind, out);
                }
                if restarts == opts.max_restarts {
                    engine.delta = engine.delta.min(FALLBACK_DELTA);
                    engine.restart_check = false;
                    warnings.push(format!("restart limit reached, continuing with delta = {}", engine.delta));
                }
                let mut next = CandidateSet::from_words(set, std::slice::from_ref(w), &[])?;
                next.nearly = cs
                    .all()
                    .filter(|c| c.rho >= opts.tau * r && c.word.len() < w.len() && c.eigen.is_real && c.dual.is_some())
                    .take(MAX_NEARLY)
                    .cloned()
                    .collect();
                cs = next;
            }
            _ => break (case, kind, out),
        }
    };

    let mut bounds = outcome.bounds.clone();
    bounds.lower = bounds.lower.max(best_lower);
    if let Some(b) = &brute {
        bounds.lower = bounds.lower.max(b.lower);
        if !bounds.exact {
            bounds.upper = bounds.upper.min(b.upper);
        }
    }
    bounds.upper = bounds.upper.max(bounds.lower);
    Ok(PipelineReport {
        bounds,
        case,
        kind: Some(kind),
        reducibility: None,
        search,
        outcome: Some(outcome),
        restarts,
        blocks: Vec::new(),
        warnings,
    })
}
