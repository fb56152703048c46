//! Sparse least-squares machinery for the Gauss-Newton steps.

mod cg;
mod sparse;

pub use cg::{gauss_newton_step, solve_normal_equations, solve_normal_equations_with, CgOutcome, Preconditioner, DIAGONAL_FLOOR};
pub use sparse::CsrMatrix;
