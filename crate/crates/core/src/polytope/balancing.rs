//! Balancing factors for the cyclic trees of the initial polytope.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    Smp,
    Nearly,
    Extra,
}

/// Target of `alpha_i * max_j q_ij` for nearly-s.m.p.s, relative to `rho_i/rho_c`.
pub const NEARLY_FACTOR: f64 = 0.999;
pub const EXTRA_TARGET: f64 = 0.01;
/// Slack in log space for the strict s.m.p. inequalities.
pub const LOG_MARGIN: f64 = 1e-6;
/// Words enumerated per tree before the horizon is shortened.
pub const WORD_BUDGET: usize = 400_000;

#[derive(Debug, Clone)]
pub struct BalancingProblem {
    /// `q[(i, j)]`, zero where `j` has no dual vector or `i == j`.
    pub q: DMatrix<f64>,
    pub roles: Vec<Role>,
    pub horizon: usize,
    /// `0.999 * rho_i / rho_c` for nearly-s.m.p.s, `1/100` for extra
    /// vertices, unused for s.m.p.s.
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Balancing {
    Factors(Vec<f64>),
    Infeasible,
}

/// Longest horizon `<= h` whose word count stays within the budget.
pub fn effective_horizon(j: usize, h: usize) -> usize {
    let mut total = 1usize;
    let mut layer = 1usize;
    for k in 1..=h {
        layer = layer.saturating_mul(j);
        total = total.saturating_add(layer);
        if total > WORD_BUDGET {
            return k - 1;
        }
    }
    h
}

/// `q_ij = sup |<v_j*, z>|` over `z` obtained from the roots of tree `i`
/// by applying any word of length `0..=h` of `mats` (already divided by
/// `rho_c`).
pub fn compute_q(mats: &[DMatrix<f64>], trees: &[Vec<DVector<f64>>], duals: &[Option<DVector<f64>>], h: usize) -> DMatrix<f64> {
    let n = trees.len();
    let mut q = DMatrix::zeros(n, n);
    for (i, roots) in trees.iter().enumerate() {
        let ws: Vec<(usize, &DVector<f64>)> =
            duals.iter().enumerate().filter(|(j, d)| *j != i && d.is_some()).map(|(j, d)| (j, d.as_ref().unwrap())).collect();
        if ws.is_empty() {
            continue;
        }
        let mut best = vec![0.0f64; ws.len()];
        for r in roots {
            sweep(mats, r, h, &ws, &mut best);
        }
        for (k, (j, _)) in ws.iter().enumerate() {
            q[(i, *j)] = best[k];
        }
    }
    q
}

fn sweep(mats: &[DMatrix<f64>], z: &DVector<f64>, depth: usize, ws: &[(usize, &DVector<f64>)], best: &mut [f64]) {
    for (k, (_, w)) in ws.iter().enumerate() {
        best[k] = best[k].max(w.dot(z).abs());
    }
    if depth == 0 {
        return;
    }
    for a in mats {
        let y = a * z;
        sweep(mats, &y, depth - 1, ws, best);
    }
}

/// Solves the balancing system. The strict inequalities among s.m.p.s
/// become difference constraints on `log alpha`, solved by Bellman-Ford.
/// Nearly-s.m.p.s and extra vertices are pinned by their equalities
/// relative to the s.m.p. factors they feed into.
pub fn compute_balancing(p: &BalancingProblem) -> Balancing {
    let n = p.roles.len();
    let smp: Vec<usize> = (0..n).filter(|&i| p.roles[i] == Role::Smp).collect();
    // x_i - x_j <= c  as edge j -> i
    let mut dist = vec![0.0f64; n];
    let mut edges = Vec::new();
    for &i in &smp {
        for &j in &smp {
            if i != j && p.q[(i, j)] > 0.0 {
                edges.push((j, i, -p.q[(i, j)].ln() - LOG_MARGIN));
            }
        }
    }
    let mut changed = true;
    for _ in 0..=smp.len() {
        changed = false;
        for &(u, v, w) in &edges {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if changed {
        return Balancing::Infeasible;
    }
    let top = smp.iter().map(|&i| dist[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut alpha = vec![1.0; n];
    for &i in &smp {
        alpha[i] = (dist[i] - top).exp();
    }
    for i in 0..n {
        if p.roles[i] == Role::Smp {
            continue;
        }
        // alpha_i * q_ij <= target * alpha_j for every s.m.p. j, tight for one
        let a = smp
            .iter()
            .filter(|&&j| p.q[(i, j)] > 0.0)
            .map(|&j| p.targets[i] * alpha[j] / p.q[(i, j)])
            .fold(f64::INFINITY, f64::min);
        alpha[i] = if a.is_finite() { a } else { 1.0 };
    }
    Balancing::Factors(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_smp_is_one() {
        let p = BalancingProblem { q: DMatrix::zeros(1, 1), roles: vec![Role::Smp], horizon: 10, targets: vec![0.0] };
        assert_eq!(compute_balancing(&p), Balancing::Factors(vec![1.0]));
    }

    #[test]
    fn cycle_detection() {
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.8, 0.0]);
        let mut p = BalancingProblem { q, roles: vec![Role::Smp, Role::Smp], horizon: 10, targets: vec![0.0; 2] };
        assert_eq!(compute_balancing(&p), Balancing::Infeasible);
        p.q[(1, 0)] = 0.4;
        match compute_balancing(&p) {
            Balancing::Factors(a) => {
                assert!(a[0] * 2.0 < a[1] && a[1] * 0.4 < a[0]);
            }
            Balancing::Infeasible => panic!("feasible"),
        }
    }

    #[test]
    fn horizon_budget() {
        assert_eq!(effective_horizon(2, 10), 10);
        assert!(effective_horizon(256, 10) <= 2);
    }
}
