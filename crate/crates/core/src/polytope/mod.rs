//! The invariant polytope algorithm.

pub mod balancing;
pub mod candidates;
pub mod engine;
pub mod selection;

pub use balancing::{compute_balancing, compute_q, Balancing, BalancingProblem, Role};
pub use candidates::{build_candidates, compute_extra_vertices, compute_extra_vertices_cone, reduce_ties, Candidate, CandidateSet, MAX_NEARLY, MAX_SMPS};
pub use engine::{restart_check, run, EngineOptions, EngineOutcome, Termination, TraceRow};
pub use selection::{natural_selection, Pending, SelectionOptions, Strategy};
