//! Exact solver for combinatorial n-fold integer programs.
//!
//! The solver halves the lower right-hand side iteration by iteration,
//! solves a small subproblem per iteration by dynamic programming over
//! lattice points, and glues the levels together by doubling. A brute-force
//! [`oracle`] is included for cross-checking on small instances.

pub mod dp;
pub mod driver;
pub mod format;
pub mod instance;
pub mod oracle;
pub mod plan;
pub mod random;
pub mod reduction;
pub mod search;
pub mod table;

pub use dp::{EngineConfig, Parallelism};
pub use driver::{solve, solve_validated, SolveError, SolveTrace, SolverConfig};
pub use instance::{
    verify_solution, InstanceError, Matrix, NFoldInstance, Solution, SolveOutcome, SolveStats,
    Status, ValidatedInstance,
};
pub use plan::{build_plan, IterationPlan, Mode};
