//! Univariate subdivision: transition matrices restricted to difference
//! subspaces, and Daubechies masks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{Num, Zero};

use crate::error::{JsrError, Result};
use crate::matrixset::MatrixSet;

type Q = Ratio<i64>;

/// Mask `a(0), a(1), ...` (support starts at zero), integer dilation and
/// digit set `M[0,1) ∩ Z`.
#[derive(Debug, Clone)]
pub struct SubdivisionScheme {
    pub mask: Vec<f64>,
    /// Exact coefficients when the mask was given as fractions.
    pub rational_mask: Option<Vec<Q>>,
    pub dilation: i64,
    pub digits: Vec<i64>,
}

fn digits_for(m: i64) -> Vec<i64> {
    if m > 0 {
        (0..m).collect()
    } else {
        (m + 1..=0).collect()
    }
}

impl SubdivisionScheme {
    pub fn new(mask: Vec<f64>, dilation: i64) -> Result<Self> {
        if dilation.abs() < 2 {
            return Err(JsrError::InvalidScheme(format!("|dilation| must be at least 2, got {dilation}")));
        }
        if mask.is_empty() || mask.iter().any(|x| !x.is_finite()) {
            return Err(JsrError::InvalidScheme("mask must be finite and nonempty".into()));
        }
        Ok(Self { mask, rational_mask: None, dilation, digits: digits_for(dilation) })
    }

    pub fn from_rational(mask: Vec<Q>, dilation: i64) -> Result<Self> {
        let f: Vec<f64> = mask.iter().map(q_to_f64).collect();
        let mut s = Self::new(f, dilation)?;
        s.rational_mask = Some(mask);
        Ok(s)
    }

    /// Mask file: a `dilation m` header, then one coefficient per line.
    /// Coefficients may be fractions `p/q`; if all of them are integers or
    /// fractions the exact path is used.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dilation = None;
        let mut coeffs: Vec<(usize, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("dilation") {
                let m = rest
                    .trim()
                    .parse::<i64>()
                    .map_err(|_| JsrError::Parse { line: i + 1, msg: format!("bad dilation `{}`", rest.trim()) })?;
                dilation = Some(m);
                continue;
            }
            for tok in line.split_whitespace() {
                coeffs.push((i + 1, tok.to_string()));
            }
        }
        let m = dilation.ok_or(JsrError::Parse { line: 1, msg: "missing `dilation m` header".into() })?;
        let exact: Option<Vec<Q>> = coeffs.iter().map(|(_, t)| parse_q(t)).collect();
        match exact {
            Some(q) => Self::from_rational(q, m),
            None => {
                let vals = coeffs
                    .iter()
                    .map(|(ln, t)| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or(JsrError::Parse { line: *ln, msg: format!("bad coefficient `{t}`") })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Self::new(vals, m)
            }
        }
    }

    /// `sum a = |m|`, the usual normalisation of convergent schemes.
    pub fn sum_rule_ok(&self) -> bool {
        (self.mask.iter().sum::<f64>() - self.dilation.abs() as f64).abs() < 1e-10
    }

    /// Integer points strictly inside the attractor of `x -> (x + g)/M`,
    /// `g` ranging over `supp a - D`.
    pub fn omega(&self) -> Vec<i64> {
        let m = self.dilation;
        let (lo_s, hi_s) = support(&self.mask);
        let dmin = *self.digits.iter().min().unwrap();
        let dmax = *self.digits.iter().max().unwrap();
        let (gmin, gmax) = ((lo_s as i64 - dmax) as f64, (hi_s as i64 - dmin) as f64);
        let mf = m as f64;
        let (lo, hi) = if m > 0 {
            (gmin / (mf - 1.0), gmax / (mf - 1.0))
        } else {
            let lo = (gmin + mf * gmax) / (mf * mf - 1.0);
            let hi = (lo + gmin) / mf;
            (lo, hi)
        };
        let first = (lo.floor() as i64) + 1;
        let last = (hi.ceil() as i64) - 1;
        (first..=last).collect()
    }
}

fn support(mask: &[f64]) -> (usize, usize) {
    let lo = mask.iter().position(|x| *x != 0.0).unwrap_or(0);
    let hi = mask.iter().rposition(|x| *x != 0.0).unwrap_or(0);
    (lo, hi)
}

fn parse_q(tok: &str) -> Option<Q> {
    match tok.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (p.parse::<i64>().ok()?, q.parse::<i64>().ok()?);
            (q != 0).then(|| Q::new(p, q))
        }
        None => tok.parse::<i64>().ok().map(Q::from_integer),
    }
}

fn q_to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Transition matrices, both on the full index window and restricted to the
/// difference subspace.
#[derive(Debug, Clone)]
pub struct TransitionMatrices {
    pub omega: Vec<i64>,
    pub digits: Vec<i64>,
    pub full: Vec<DMatrix<f64>>,
    /// Columns span the order-k difference subspace of the window.
    pub basis: DMatrix<f64>,
    /// `None` when the restricted dimension is zero.
    pub restricted: Option<MatrixSet>,
}

fn binom(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// Solves `B X = T B` for the banded difference basis `B` by forward
/// substitution on its unit lower triangular top block and checks the
/// remaining rows.
fn restrict<T, F>(t: &[Vec<T>], order: usize, from_i64: F, is_small: impl Fn(&T) -> bool) -> Result<Vec<Vec<T>>>
where
    T: Num + Copy,
    F: Fn(i64) -> T,
{
    let n = t.len();
    let r = n - order;
    let bcol = |row: usize, col: usize| -> T {
        if row >= col && row - col <= order {
            let i = row - col;
            let sign = if i.is_multiple_of(2) { 1 } else { -1 };
            from_i64(sign * binom(order, i))
        } else {
            T::zero()
        }
    };
    // TB
    let mut tb = vec![vec![T::zero(); r]; n];
    for (row, trow) in t.iter().enumerate() {
        for (c, out) in tb[row].iter_mut().enumerate() {
            let mut acc = T::zero();
            for i in 0..=order {
                acc = acc + trow[c + i] * bcol(c + i, c);
            }
            *out = acc;
        }
    }
    let mut x = vec![vec![T::zero(); r]; r];
    for row in 0..r {
        for c in 0..r {
            let mut acc = tb[row][c];
            for (k, xk) in x.iter().enumerate().take(row).skip(row.saturating_sub(order)) {
                acc = acc - bcol(row, k) * xk[c];
            }
            x[row][c] = acc;
        }
    }
    for (row, tbrow) in tb.iter().enumerate().skip(r) {
        for c in 0..r {
            let mut acc = T::zero();
            for (k, xk) in x.iter().enumerate().skip(row.saturating_sub(order)) {
                acc = acc + bcol(row, k) * xk[c];
            }
            if !is_small(&(acc - tbrow[c])) {
                return Err(JsrError::InvalidScheme(format!(
                    "difference subspace of order {order} is not invariant (mask lacks sum rules)"
                )));
            }
        }
    }
    Ok(x)
}

pub fn transition_matrices(scheme: &SubdivisionScheme, order: usize) -> Result<TransitionMatrices> {
    let omega = scheme.omega();
    let n = omega.len();
    let m = scheme.dilation;
    let idx = |d: i64, al: i64, be: i64| -> Option<usize> {
        let k = d + m * al - be;
        (k >= 0 && (k as usize) < scheme.mask.len()).then_some(k as usize)
    };
    let mut full = Vec::new();
    let mut restricted = Vec::new();
    for &d in &scheme.digits {
        let tf: Vec<Vec<f64>> = omega
            .iter()
            .map(|&al| omega.iter().map(|&be| idx(d, al, be).map_or(0.0, |k| scheme.mask[k])).collect())
            .collect();
        full.push(DMatrix::from_fn(n, n, |i, j| tf[i][j]));
        if n <= order {
            continue;
        }
        let x: Vec<Vec<f64>> = match &scheme.rational_mask {
            Some(q) => {
                let tq: Vec<Vec<Q>> = omega
                    .iter()
                    .map(|&al| omega.iter().map(|&be| idx(d, al, be).map_or(Q::zero(), |k| q[k])).collect())
                    .collect();
                restrict(&tq, order, Q::from_integer, |v: &Q| v.is_zero())?
                    .iter()
                    .map(|r| r.iter().map(q_to_f64).collect())
                    .collect()
            }
            None => {
                let scale = scheme.mask.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                restrict(&tf, order, |v| v as f64, |v: &f64| v.abs() <= 1e-10 * scale * (1 << order) as f64)?
            }
        };
        let r = n - order;
        restricted.push(DMatrix::from_fn(r, r, |i, j| x[i][j]));
    }
    let r = n.saturating_sub(order);
    let basis = DMatrix::from_fn(n, r, |row, col| {
        if row >= col && row - col <= order {
            let i = row - col;
            (if i % 2 == 0 { 1.0 } else { -1.0 }) * binom(order, i) as f64
        } else {
            0.0
        }
    });
    let restricted = if r == 0 { None } else { Some(MatrixSet::new(restricted)?) };
    Ok(TransitionMatrices { omega, digits: scheme.digits.clone(), full, basis, restricted })
}

/// Minimum-phase Daubechies mask with `2n` taps, normalised to `sum a = 2`.
pub fn daubechies_scheme(n: usize) -> Result<SubdivisionScheme> {
    if !(1..=12).contains(&n) {
        return Err(JsrError::InvalidScheme(format!("Daubechies order {n} not supported")));
    }
    // P(y) = sum_{k<n} C(n-1+k, k) y^k
    let p: Vec<f64> = (0..n).map(|k| binom(n - 1 + k, k) as f64).collect();
    let ys = poly_roots(&p)?;
    // ascending coefficients of (1+z)^n prod (z - z_k)
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..n {
        c = poly_mul(&c, &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
    }
    for y in ys {
        let b = Complex64::new(2.0, 0.0) - y * 4.0;
        let disc = (b * b - 4.0).sqrt();
        let (z1, z2) = ((b + disc) / 2.0, (b - disc) / 2.0);
        let z = if z1.norm() < z2.norm() { z1 } else { z2 };
        c = poly_mul(&c, &[-z, Complex64::new(1.0, 0.0)]);
    }
    let re: Vec<f64> = c.iter().rev().map(|z| z.re).collect();
    let sum: f64 = re.iter().sum();
    let mask: Vec<f64> = re.iter().map(|v| v * 2.0 / sum).collect();
    SubdivisionScheme::new(mask, 2)
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Roots of an ascending real coefficient polynomial: companion matrix
/// eigenvalues polished by Newton steps.
fn poly_roots(c: &[f64]) -> Result<Vec<Complex64>> {
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[deg];
    let comp = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -c[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut roots = crate::linalg::eigenvalues(&comp).map_err(|_| JsrError::RootFinding)?;
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &a in c.iter().rev() {
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp)
    };
    for z in roots.iter_mut() {
        for _ in 0..8 {
            let (p, dp) = eval(*z);
            if dp.norm() == 0.0 {
                break;
            }
            *z -= p / dp;
        }
        let (p, _) = eval(*z);
        let scale: f64 = c.iter().enumerate().map(|(k, a)| a.abs() * z.norm().powi(k as i32)).sum();
        if p.norm().is_nan() || p.norm() > 1e-8 * scale {
            return Err(JsrError::RootFinding);
        }
    }
    Ok(roots)
}

/// The mask and restricted matrices of the balancing example (`m = -3`).
pub fn example_scheme() -> SubdivisionScheme {
    let q = [3, 3, 4, 3, 3, 4, 3, 3, 4, 3, 3].iter().map(|&k| Q::new(k, 12)).collect();
    SubdivisionScheme::from_rational(q, -3).expect("valid example scheme")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_window_and_digits() {
        let s = example_scheme();
        assert_eq!(s.digits, vec![-2, -1, 0]);
        assert_eq!(s.omega(), (-4..=1).collect::<Vec<_>>());
        assert!(s.sum_rule_ok());
    }

    #[test]
    fn daubechies_two_closed_form() {
        let s = daubechies_scheme(2).unwrap();
        let r3 = 3f64.sqrt();
        let want = [(1.0 + r3) / 4.0, (3.0 + r3) / 4.0, (3.0 - r3) / 4.0, (1.0 - r3) / 4.0];
        for (a, b) in s.mask.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{:?}", s.mask);
        }
        assert_eq!(s.omega(), vec![0, 1, 2]);
    }

    #[test]
    fn daubechies_orthonormality() {
        for n in 1..=8 {
            let a = daubechies_scheme(n).unwrap().mask;
            assert_eq!(a.len(), 2 * n);
            assert!((a.iter().sum::<f64>() - 2.0).abs() < 1e-10);
            for k in 0..n {
                let s: f64 = (0..a.len() - 2 * k).map(|i| a[i] * a[i + 2 * k]).sum();
                let want = if k == 0 { 2.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-9, "n={n} k={k} s={s}");
            }
        }
    }

    #[test]
    fn hat_function() {
        let s = SubdivisionScheme::parse("dilation 2\n1/2\n1\n1/2\n").unwrap();
        assert!(s.rational_mask.is_some());
        let t = transition_matrices(&s, 1).unwrap();
        let set = t.restricted.unwrap();
        assert_eq!(set.dim(), 1);
        for m in set.matrices() {
            assert!((m[(0, 0)].abs() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_sum_rule_is_reported() {
        let s = SubdivisionScheme::new(vec![1.0, 0.5, 0.2], 2).unwrap();
        assert!(transition_matrices(&s, 1).is_err());
    }

    #[test]
    fn parse_errors() {
        assert!(SubdivisionScheme::parse("1\n2\n").is_err());
        assert!(matches!(SubdivisionScheme::parse("dilation 2\n1\nfoo\n"), Err(JsrError::Parse { line: 3, .. })));
        assert!(SubdivisionScheme::parse("dilation 1\n1\n").is_err());
    }
}
