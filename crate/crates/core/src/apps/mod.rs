pub mod analysis;
pub mod capacity;
pub mod fixtures;
pub mod subdivision;

pub use analysis::{capacity, holder_from_jsr, regularity, CapacityResult, RegularityResult};
pub use capacity::{capacity_from_jsr, capacity_matrices, DifferencePattern, Symbol};
pub use fixtures::{fixture, fixture_names};
pub use subdivision::{daubechies_scheme, transition_matrices, SubdivisionScheme, TransitionMatrices};
