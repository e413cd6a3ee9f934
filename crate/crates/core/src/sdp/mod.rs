//! Strict LMI feasibility and linear objectives over LMI sets.

mod check;
pub mod jacobi;
mod problem;
mod solver;

pub use check::{check_point, check_point_margins, BlockCheck, CheckReport};
pub use problem::{
    flatten, sym_index, sym_pairs, Constraint, ConstraintBuilder, LmiProblem, Term, VarId, VarKind,
    Variable,
};
pub use solver::{margins, minimize, solve, SolveOptions, SolveOutcome, SolveStatus};
