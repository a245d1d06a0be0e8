pub mod apps;
pub mod bounds;
pub mod error;
pub mod gripenberg;
pub mod linalg;
pub mod lp;
pub mod matrixset;
pub mod norms;
pub mod pipeline;
pub mod polytope;
pub mod preprocess;

pub use bounds::JsrBounds;
pub use error::{JsrError, Result};
pub use matrixset::{EigenPair, MatrixSet, ProductWord};
