//! Assembly, linear solves and the nonlinear iterations.

pub mod assembly;
pub mod linear;
pub mod nonlinear;

pub use assembly::{
    assemble_frozen, assemble_stabilized, lipschitz_slack, load_vector, monotonicity_gap, nonlinear_form, residual,
    FormOptions, KappaInterpolation, Penalty,
};
pub use linear::{LinearSolver, LinearSolverKind, SolveStats, SparseSystem};
pub use nonlinear::{
    richardson_contraction_bound, solve, solve_kacanov, solve_richardson, IterationHistory, IterationRecord, Method,
    Solution, SolverConfig,
};
