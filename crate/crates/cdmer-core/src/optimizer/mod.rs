//! Numerical subsolvers for the transfer regression.
//!
//! Three independent pieces: an inexact augmented-Lagrangian solver for the
//! L1-regularized coefficient subproblem, a cyclic coordinate-descent solver
//! for the non-negative lasso over region weights, and Euclidean projection
//! onto the probability simplex for prediction.

mod ialm;
mod lasso;
mod simplex;

pub use ialm::{solve_p_subproblem, solve_q, soft_threshold, IalmParams, PSolution, PSubproblem};
pub use lasso::{build_w_design, solve_nonneg_lasso, LassoProblem, LassoSolution};
pub use simplex::project_simplex;
