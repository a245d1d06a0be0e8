//! Revised simplex for the two hull membership programs.
//!
//! Symmetrized hull: `min 1'(t+ + t-)` s.t. `V t+ - V t- = x`, `t± >= 0`.
//! Cone: `min 1'u` s.t. `V u - s = x`, `u, s >= 0`.
//!
//! The basis inverse is kept explicitly (rows are small, columns many) and
//! refreshed from scratch every `REFACTOR` pivots. A stored optimal basis is
//! dual feasible for every right-hand side because `V` and the costs stay
//! fixed, so warm starts run the dual simplex.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum HullKind {
    Symmetrized,
    Cone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Iteration cap hit; `value` is the best feasible objective (maybe +inf).
    PivotLimit,
}

#[derive(Debug, Clone)]
pub struct LpBasis {
    cols: Vec<usize>,
    art_sign: Vec<f64>,
    binv: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    /// `t = t+ - t-` (symmetrized) or `u` (cone); one entry per vertex.
    pub coeffs: DVector<f64>,
    /// Simplex multipliers `y`; a separating functional when optimal.
    pub dual: DVector<f64>,
    pub basis: Option<LpBasis>,
    pub pivots: usize,
}

const REFACTOR: usize = 64;
const PIV_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct HullLp {
    v: DMatrix<f64>,
    kind: HullKind,
}

struct State {
    cols: Vec<usize>,
    art_sign: Vec<f64>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    since_refactor: usize,
    pivots: usize,
}

enum Outcome {
    Done,
    Unbounded,
    Limit,
    Infeasible,
}

impl HullLp {
    pub fn new(v: DMatrix<f64>, kind: HullKind) -> Self {
        Self { v, kind }
    }

    pub fn vertices(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn kind(&self) -> HullKind {
        self.kind
    }

    fn m(&self) -> usize {
        self.v.nrows()
    }

    fn k(&self) -> usize {
        self.v.ncols()
    }

    /// Number of structural columns.
    fn n(&self) -> usize {
        match self.kind {
            HullKind::Symmetrized => 2 * self.k(),
            HullKind::Cone => self.k() + self.m(),
        }
    }

    fn cost(&self, j: usize, phase1: bool) -> f64 {
        let n = self.n();
        if phase1 {
            return if j >= n { 1.0 } else { 0.0 };
        }
        if j >= n {
            return 0.0;
        }
        match self.kind {
            HullKind::Symmetrized => 1.0,
            HullKind::Cone => {
                if j < self.k() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn column(&self, j: usize, art_sign: &[f64]) -> DVector<f64> {
        let (m, k, n) = (self.m(), self.k(), self.n());
        if j >= n {
            let mut e = DVector::zeros(m);
            e[j - n] = art_sign[j - n];
            return e;
        }
        match self.kind {
            HullKind::Symmetrized => {
                if j < k {
                    self.v.column(j).into_owned()
                } else {
                    -self.v.column(j - k)
                }
            }
            HullKind::Cone => {
                if j < k {
                    self.v.column(j).into_owned()
                } else {
                    let mut e = DVector::zeros(m);
                    e[j - k] = -1.0;
                    e
                }
            }
        }
    }

    /// `w' a_j` for every structural column.
    fn row_products(&self, w: &DVector<f64>) -> Vec<f64> {
        let g = self.v.tr_mul(w);
        let k = self.k();
        let mut out = Vec::with_capacity(self.n());
        out.extend(g.iter().copied());
        match self.kind {
            HullKind::Symmetrized => out.extend(g.iter().map(|x| -x)),
            HullKind::Cone => out.extend(w.iter().map(|x| -x)),
        }
        debug_assert_eq!(out.len(), k + if self.kind == HullKind::Cone { self.m() } else { k });
        out
    }

    fn refactor(&self, st: &mut State, b: &DVector<f64>) -> bool {
        let m = self.m();
        let mut bm = DMatrix::zeros(m, m);
        for (i, &c) in st.cols.iter().enumerate() {
            bm.set_column(i, &self.column(c, &st.art_sign));
        }
        match bm.try_inverse() {
            Some(inv) => {
                st.binv = inv;
                st.xb = &st.binv * b;
                st.since_refactor = 0;
                true
            }
            None => false,
        }
    }

    fn pivot(&self, st: &mut State, r: usize, q: usize, alpha: &DVector<f64>, b: &DVector<f64>) {
        let m = self.m();
        let theta = st.xb[r] / alpha[r];
        for i in 0..m {
            if i != r {
                st.xb[i] -= theta * alpha[i];
            }
        }
        st.xb[r] = theta;
        let piv = alpha[r];
        for c in 0..m {
            st.binv[(r, c)] /= piv;
        }
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for c in 0..m {
                    let t = st.binv[(r, c)];
                    st.binv[(i, c)] -= f * t;
                }
            }
        }
        st.cols[r] = q;
        st.pivots += 1;
        st.since_refactor += 1;
        if st.since_refactor >= REFACTOR {
            let saved = st.binv.clone();
            if !self.refactor(st, b) {
                st.binv = saved;
                st.since_refactor = 0;
            }
        }
    }

    fn duals(&self, st: &State, phase1: bool) -> DVector<f64> {
        let cb = DVector::from_iterator(self.m(), st.cols.iter().map(|&c| self.cost(c, phase1)));
        st.binv.tr_mul(&cb)
    }

    fn primal(&self, st: &mut State, b: &DVector<f64>, phase1: bool, tol: f64, cap: usize) -> Outcome {
        let n = self.n();
        let bland_after = 50 * (self.m() + n);
        let mut in_basis = vec![false; n];
        for &c in &st.cols {
            if c < n {
                in_basis[c] = true;
            }
        }
        let mut local = 0usize;
        loop {
            if local >= cap {
                return Outcome::Limit;
            }
            let bland = local >= bland_after;
            let y = self.duals(st, phase1);
            let ya = self.row_products(&y);
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..n {
                if in_basis[j] {
                    continue;
                }
                let d = self.cost(j, phase1) - ya[j];
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else { return Outcome::Done };
            let alpha = &st.binv * self.column(q, &st.art_sign);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m() {
                if alpha[i] > PIV_TOL {
                    let ratio = st.xb[i].max(0.0) / alpha[i];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - tol {
                                true
                            } else if ratio <= best_ratio + tol {
                                if bland {
                                    st.cols[i] < st.cols[l]
                                } else {
                                    alpha[i] > alpha[l]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = best_ratio.min(ratio);
                    }
                }
            }
            let Some(r) = leave else { return Outcome::Unbounded };
            let old = st.cols[r];
            if st.xb[r] < 0.0 {
                st.xb[r] = 0.0;
            }
            self.pivot(st, r, q, &alpha, b);
            if old < n {
                in_basis[old] = false;
            }
            in_basis[q] = true;
            local += 1;
        }
    }

    fn dual_simplex(&self, st: &mut State, b: &DVector<f64>, tol: f64, cap: usize) -> Outcome {
        let n = self.n();
        let mut local = 0usize;
        loop {
            if local >= cap {
                return Outcome::Limit;
            }
            let mut r = None;
            let mut worst = -tol;
            for i in 0..self.m() {
                if st.cols[i] >= n {
                    // artificial of a redundant row: must stay at zero
                    if st.xb[i].abs() > tol {
                        return Outcome::Infeasible;
                    }
                    continue;
                }
                if st.xb[i] < worst {
                    worst = st.xb[i];
                    r = Some(i);
                }
            }
            let Some(r) = r else { return Outcome::Done };
            let rho = st.binv.row(r).transpose();
            let alpha_r = self.row_products(&rho);
            let y = self.duals(st, false);
            let ya = self.row_products(&y);
            let mut in_basis = vec![false; n];
            for &c in &st.cols {
                if c < n {
                    in_basis[c] = true;
                }
            }
            let mut enter = None;
            let mut best = f64::INFINITY;
            let mut best_mag = 0.0;
            for j in 0..n {
                if in_basis[j] || alpha_r[j] >= -PIV_TOL {
                    continue;
                }
                let d = (self.cost(j, false) - ya[j]).max(0.0);
                let ratio = d / -alpha_r[j];
                if ratio < best - 1e-14 || (ratio <= best + 1e-14 && -alpha_r[j] > best_mag) {
                    best = ratio.min(best);
                    best_mag = -alpha_r[j];
                    enter = Some(j);
                }
            }
            let Some(q) = enter else { return Outcome::Infeasible };
            let alpha = &st.binv * self.column(q, &st.art_sign);
            if alpha[r].abs() < PIV_TOL {
                return Outcome::Limit;
            }
            self.pivot(st, r, q, &alpha, b);
            local += 1;
        }
    }

    fn finish(&self, st: State, status: LpStatus) -> LpSolution {
        let (m, k, n) = (self.m(), self.k(), self.n());
        let mut coeffs = DVector::zeros(k);
        let mut value = 0.0;
        for (i, &c) in st.cols.iter().enumerate() {
            let x = st.xb[i].max(0.0);
            value += self.cost(c, false) * x;
            if c < k {
                coeffs[c] += x;
            } else if c < n && self.kind == HullKind::Symmetrized {
                coeffs[c - k] -= x;
            }
        }
        let dual = self.duals(&st, false);
        let _ = m;
        LpSolution {
            status,
            value,
            coeffs,
            dual,
            pivots: st.pivots,
            basis: Some(LpBasis { cols: st.cols, art_sign: st.art_sign, binv: st.binv }),
        }
    }

    fn infeasible(&self, pivots: usize) -> LpSolution {
        LpSolution {
            status: LpStatus::Infeasible,
            value: f64::INFINITY,
            coeffs: DVector::zeros(self.k()),
            dual: DVector::zeros(self.m()),
            basis: None,
            pivots,
        }
    }

    fn limit(&self, st: Option<State>, pivots: usize, feasible: bool) -> LpSolution {
        match st {
            Some(st) if feasible => self.finish(st, LpStatus::PivotLimit),
            _ => LpSolution {
                status: LpStatus::PivotLimit,
                value: f64::INFINITY,
                coeffs: DVector::zeros(self.k()),
                dual: DVector::zeros(self.m()),
                basis: None,
                pivots,
            },
        }
    }

    /// Minkowski norm of `x`, optionally warm started from a basis returned
    /// by an earlier call on this same program.
    pub fn solve(&self, x: &DVector<f64>, warm: Option<&LpBasis>) -> LpSolution {
        let m = self.m();
        assert_eq!(x.len(), m, "dimension mismatch");
        let scale = x.amax();
        if scale == 0.0 {
            let st = State {
                cols: (self.n()..self.n() + m).collect(),
                art_sign: vec![1.0; m],
                binv: DMatrix::identity(m, m),
                xb: DVector::zeros(m),
                since_refactor: 0,
                pivots: 0,
            };
            let mut sol = self.finish(st, LpStatus::Optimal);
            sol.basis = None;
            return sol;
        }
        if self.k() == 0 {
            return self.infeasible(0);
        }
        let tol = 1e-10 * scale;
        let cap = 200 * (m + self.n()) + 1000;
        if let Some(w) = warm {
            if w.cols.len() == m {
                let mut st = State {
                    cols: w.cols.clone(),
                    art_sign: w.art_sign.clone(),
                    binv: w.binv.clone(),
                    xb: &w.binv * x,
                    since_refactor: 0,
                    pivots: 0,
                };
                match self.dual_simplex(&mut st, x, tol, cap) {
                    Outcome::Done => {
                        // guard against drift in the stored inverse
                        let y = self.duals(&st, false);
                        let ya = self.row_products(&y);
                        let dual_ok = (0..self.n()).all(|j| self.cost(j, false) - ya[j] > -1e-8);
                        if dual_ok {
                            return self.finish(st, LpStatus::Optimal);
                        }
                    }
                    Outcome::Infeasible if self.kind == HullKind::Cone || !self.in_span(x) => {
                        return self.infeasible(st.pivots);
                    }
                    _ => {}
                }
            }
        }
        self.cold(x, tol, cap)
    }

    fn in_span(&self, x: &DVector<f64>) -> bool {
        let pinv = crate::linalg::pseudo_inverse(&self.v, 1e-12);
        let r = &self.v * (pinv * x) - x;
        r.amax() <= 1e-9 * x.amax()
    }

    fn cold(&self, b: &DVector<f64>, tol: f64, cap: usize) -> LpSolution {
        let m = self.m();
        let n = self.n();
        let art_sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut st = State {
            cols: (n..n + m).collect(),
            binv: DMatrix::from_diagonal(&DVector::from_vec(art_sign.clone())),
            xb: b.abs(),
            art_sign,
            since_refactor: 0,
            pivots: 0,
        };
        match self.primal(&mut st, b, true, tol, cap) {
            Outcome::Done => {}
            Outcome::Limit | Outcome::Unbounded | Outcome::Infeasible => {
                let p = st.pivots;
                return self.limit(None, p, false);
            }
        }
        self.refactor(&mut st, b);
        let infeas: f64 = st.cols.iter().zip(st.xb.iter()).filter(|(&c, _)| c >= n).map(|(_, x)| x.abs()).sum();
        if infeas > 1e-9 * b.amax() * (m as f64) {
            return self.infeasible(st.pivots);
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if st.cols[r] < n {
                continue;
            }
            let rho = st.binv.row(r).transpose();
            let ar = self.row_products(&rho);
            let mut in_basis = vec![false; n];
            for &c in &st.cols {
                if c < n {
                    in_basis[c] = true;
                }
            }
            let mut best = None;
            let mut mag = 1e-9;
            for j in 0..n {
                if !in_basis[j] && ar[j].abs() > mag {
                    mag = ar[j].abs();
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                let alpha = &st.binv * self.column(q, &st.art_sign);
                st.xb[r] = 0.0;
                self.pivot(&mut st, r, q, &alpha, b);
            }
        }
        self.refactor(&mut st, b);
        match self.primal(&mut st, b, false, tol, cap) {
            Outcome::Done => self.finish(st, LpStatus::Optimal),
            Outcome::Limit | Outcome::Unbounded | Outcome::Infeasible => {
                let p = st.pivots;
                self.limit(Some(st), p, true)
            }
        }
    }
}
