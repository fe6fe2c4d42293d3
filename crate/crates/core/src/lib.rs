//! Bounds on multi-step expectations of random walks on graphs whose edge
//! weights are only known to lie in intervals, with the total weight at each
//! vertex fixed.
//!
//! - [`graph`]: interval bounds, weight functions, extremal selections.
//! - [`chain`]: transition operators, expectations, invariant distribution.
//! - [`search`]: split-point local search and multistart.
//! - [`oracle`]: exact bounds by enumeration for small instances.
//! - [`generate`]: seeded random instances.
//! - [`instance`]: instance files and the output document format.
//! - [`experiments`]: CSV-producing experiment runners.

pub mod chain;
pub mod experiments;
pub mod generate;
pub mod graph;
pub mod instance;
pub mod oracle;
pub mod rng;
pub mod search;

pub use chain::{
    apply_left, apply_right, detailed_balance_residual, expectation, invariant_distribution,
    sequence_lower_probability, transition_matrix, Gamble, MassFunction, TransitionMatrix, WeightVector,
};
pub use graph::{
    extremal_weight, psi_field, selection_of, weight_from_selection, Bound, Edge, EdgeSelection, IntervalBounds,
    PsiField, StateSpace, ValidationReport, ViolationKind, WeightFunction,
};
pub use instance::Instance;
pub use oracle::{enumerate_extremal, exact_bounds, ExactBounds};
pub use search::{
    improve_at, local_optimize, multistart, multistart_from, random_extremal_vector, LocalOptimum,
    MultistartReport, OptimizationProblem, Sense, SweepStrategy,
};
