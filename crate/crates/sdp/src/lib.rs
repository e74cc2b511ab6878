//! Dense semidefinite programming backend for controller synthesis.
//!
//! Solves problems of the form
//!
//! ```text
//!     minimize   cᵀ s                      (s = scalar decision variables)
//!     subject to F_k(X₁, …, X_p, s) ⪰ 0    for every constraint block k
//! ```
//!
//! where each `F_k` is an affine symmetric-matrix expression in symmetric
//! matrix variables `X_i` and scalars `s`. This is the feasibility language
//! of linear matrix inequalities; the solver is a two-phase log-barrier
//! interior-point method sized for the dense, medium-scale problems that
//! come out of vertex-LMI controller synthesis (state dimensions up to a
//! few tens, a handful of constraint blocks per vertex).
//!
//! Matrix variables are vectorized internally over the upper triangle with
//! √2 scaling on off-diagonal entries, so the flattening is an isometry and
//! constraint assembly stays independent of any particular solver.
//!
//! Problems can be dumped in the SDPA sparse interchange format
//! (see [`SdpProblem::write_sdpa`]) for cross-checking against external
//! solvers.

mod expr;
mod problem;
mod solve;

#[cfg(test)]
mod reference;

pub use expr::{AffineBlock, ScalarVarId, SymVarId};
pub use problem::{SdpError, SdpProblem};
pub use solve::{
    check_solution, solve, solve_with_start, ConstraintResidual, SdpSolution, SolutionCheck,
    SolveOptions, SolveStatus, WarmStart,
};
