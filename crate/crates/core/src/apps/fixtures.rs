//! Named matrix sets with known behaviour.

use crate::apps::subdivision::{example_scheme, transition_matrices};
use crate::error::{JsrError, Result};
use crate::matrixset::MatrixSet;

/// Names accepted by [`fixture`]. `C<n>` takes any `n >= 1`.
pub fn fixture_names() -> Vec<&'static str> {
    vec!["C<n>", "X119", "ex_rho0", "ex_rho", "E", "subdiv-example"]
}

/// `{C0, Cn}` with `C0 = [[1,1],[0,1]]`, `Cn = [[0,0],[e^(1+1/n)/n, 0]]`.
/// The product `C0^n Cn` attains the JSR `e^(1/n)`.
pub fn long_smp_family(n: u32) -> Result<MatrixSet> {
    if n == 0 {
        return Err(JsrError::InvalidSet("C_n needs n >= 1".into()));
    }
    let nf = n as f64;
    let c = (1.0 + 1.0 / nf).exp() / nf;
    MatrixSet::from_rows(2, &[&[1.0, 1.0, 0.0, 1.0], &[0.0, 0.0, c, 0.0]])
}

pub fn x119() -> MatrixSet {
    MatrixSet::from_rows(
        2,
        &[
            &[15.0 / 92.0, -73.0 / 79.0, 56.0 / 59.0, 89.0 / 118.0],
            &[-231.0 / 241.0, -143.0 / 219.0, 103.0 / 153.0, -38.0 / 65.0],
        ],
    )
    .expect("fixed entries")
}

pub fn ex_rho0() -> MatrixSet {
    MatrixSet::from_rows(2, &[&[2.0, 0.0, 0.0, 2.0], &[0.0, 2.0, 0.0, 0.0], &[0.0, 0.0, 2.0, 0.0]]).expect("fixed entries")
}

/// `{A, A^T, B, B^T}` with `A = [[1,1],[0,1]]`, `B = 3/4 A`.
pub fn ex_rho() -> MatrixSet {
    MatrixSet::from_rows(
        2,
        &[&[1.0, 1.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 1.0], &[0.75, 0.75, 0.0, 0.75], &[0.75, 0.0, 0.75, 0.75]],
    )
    .expect("fixed entries")
}

pub fn balancing_pair() -> MatrixSet {
    MatrixSet::from_rows(2, &[&[2.0, 1.0, -1.0, 2.0], &[2.0, 0.0, 2.0, 1.0]]).expect("fixed entries")
}

pub fn subdivision_example() -> MatrixSet {
    transition_matrices(&example_scheme(), 1)
        .ok()
        .and_then(|t| t.restricted)
        .expect("example scheme restricts to dimension 5")
}

pub fn fixture(name: &str) -> Result<MatrixSet> {
    match name {
        "X119" | "x119" => Ok(x119()),
        "ex_rho0" => Ok(ex_rho0()),
        "ex_rho" => Ok(ex_rho()),
        "E" => Ok(balancing_pair()),
        "subdiv-example" => Ok(subdivision_example()),
        _ => {
            let n = name
                .strip_prefix("C_")
                .or_else(|| name.strip_prefix('C'))
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| JsrError::InvalidSet(format!("unknown fixture `{name}`")))?;
            long_smp_family(n)
        }
    }
}
