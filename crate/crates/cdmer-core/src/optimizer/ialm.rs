//! Inexact augmented-Lagrangian solver for the coefficient subproblem
//!
//!   min_P ‖L − PᵀK̃‖²_F + μ‖P‖₁ + γ‖Pᵀk̃‖²₂
//!
//! The L1 term is split onto an auxiliary variable Q (constraint P = Q) and
//! the augmented Lagrangian is minimized by alternating a closed-form Q
//! update, an elementwise soft-threshold P update, and a multiplier update
//! with geometrically increasing penalty.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Penalty schedule and stopping thresholds for the augmented-Lagrangian loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IalmParams {
    /// Initial penalty weight κ.
    pub kappa_init: f64,
    /// Per-iteration penalty growth factor, > 1.
    pub rho: f64,
    /// Penalty cap.
    pub kappa_max: f64,
    /// Stopping threshold on the max-abs residuals.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for IalmParams {
    fn default() -> Self {
        IalmParams {
            kappa_init: 1e-2,
            rho: 1.1,
            kappa_max: 1e6,
            epsilon: 1e-7,
            max_iters: 500,
        }
    }
}

impl IalmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_init > 0.0 && self.kappa_init.is_finite()) {
            return Err(Error::InvalidParameter("kappa_init must be positive".into()));
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter("rho must be > 1".into()));
        }
        if self.kappa_max < self.kappa_init {
            return Err(Error::InvalidParameter(
                "kappa_max must be >= kappa_init".into(),
            ));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// One fixed-weights instance of the coefficient subproblem.
///
/// `ks_tilde` is the region-weighted source kernel Σᵢ wᵢ K_i^s of shape
/// (N_s+N_t)×N_s, `kst_tilde` the weighted source/target mean gap of length
/// N_s+N_t, and `labels` the c×N_s one-hot target matrix.
#[derive(Debug, Clone)]
pub struct PSubproblem {
    pub ks_tilde: DMatrix<f64>,
    pub kst_tilde: DVector<f64>,
    pub labels: DMatrix<f64>,
    pub mu: f64,
    pub gamma: f64,
}

impl PSubproblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.ks_tilde.nrows();
        if self.kst_tilde.len() != n {
            return Err(Error::dims(
                "subproblem mean-gap vector",
                n.to_string(),
                self.kst_tilde.len().to_string(),
            ));
        }
        if self.labels.ncols() != self.ks_tilde.ncols() {
            return Err(Error::dims(
                "subproblem labels",
                format!("{} columns", self.ks_tilde.ncols()),
                format!("{} columns", self.labels.ncols()),
            ));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::InvalidParameter("mu must be finite and >= 0".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidParameter(
                "gamma must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Basis size N_s + N_t (row count of every coefficient matrix).
    pub fn basis_len(&self) -> usize {
        self.ks_tilde.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.labels.nrows()
    }

    /// Subproblem objective ‖L − PᵀK̃‖²_F + μ‖P‖₁ + γ‖Pᵀk̃‖²₂ at `p`.
    pub fn objective(&self, p: &DMatrix<f64>) -> f64 {
        let residual = &self.labels - p.transpose() * &self.ks_tilde;
        let l1: f64 = p.iter().map(|v| v.abs()).sum();
        let gap = p.transpose() * &self.kst_tilde;
        residual.norm_squared() + self.mu * l1 + self.gamma * gap.norm_squared()
    }
}

/// Soft-thresholding: a−ζ above ζ, a+ζ below −ζ, 0 in the dead zone.
#[inline]
pub fn soft_threshold(a: f64, zeta: f64) -> f64 {
    if a > zeta {
        a - zeta
    } else if a < -zeta {
        a + zeta
    } else {
        0.0
    }
}

/// Spectral factorization of M = K̃K̃ᵀ + γ·k̃k̃ᵀ, reused across all shifted
/// solves (M + s·I)x = b of one subproblem instance.
struct ShiftedSolver {
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl ShiftedSolver {
    fn new(problem: &PSubproblem) -> Result<Self> {
        let m = &problem.ks_tilde * problem.ks_tilde.transpose()
            + problem.gamma * (&problem.kst_tilde * problem.kst_tilde.transpose());
        let eig = m
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or_else(|| Error::SolveFailure("symmetric eigendecomposition failed".into()))?;
        // M is positive semi-definite; tiny negative eigenvalues are roundoff.
        let eigenvalues = eig.eigenvalues.map(|v| v.max(0.0));
        Ok(ShiftedSolver {
            eigenvectors: eig.eigenvectors,
            eigenvalues,
        })
    }

    fn solve(&self, rhs: &DMatrix<f64>, shift: f64) -> DMatrix<f64> {
        let mut coeffs = self.eigenvectors.transpose() * rhs;
        for (i, mut row) in coeffs.row_iter_mut().enumerate() {
            row /= self.eigenvalues[i] + shift;
        }
        &self.eigenvectors * coeffs
    }
}

fn rhs_base(problem: &PSubproblem) -> DMatrix<f64> {
    &problem.ks_tilde * problem.labels.transpose()
}

/// Closed-form minimizer of the smooth part of the augmented Lagrangian:
///
///   Q = (K̃K̃ᵀ + γ·k̃k̃ᵀ + (κ/2)I)⁻¹ (K̃Lᵀ + (T + κP)/2)
pub fn solve_q(
    problem: &PSubproblem,
    p: &DMatrix<f64>,
    t: &DMatrix<f64>,
    kappa: f64,
) -> Result<DMatrix<f64>> {
    problem.validate()?;
    let (n, c) = (problem.basis_len(), problem.class_count());
    for (name, m) in [("P", p), ("T", t)] {
        if m.nrows() != n || m.ncols() != c {
            return Err(Error::dims(
                "solve_q input",
                format!("{n}x{c}"),
                format!("{}x{} for {name}", m.nrows(), m.ncols()),
            ));
        }
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter("kappa must be positive".into()));
    }
    let solver = ShiftedSolver::new(problem)?;
    let rhs = rhs_base(problem) + 0.5 * (t + kappa * p);
    Ok(solver.solve(&rhs, 0.5 * kappa))
}

/// Result of one augmented-Lagrangian run.
#[derive(Debug, Clone)]
pub struct PSolution {
    /// Iterate with the lowest subproblem objective seen (the warm start
    /// included), so a solve never returns anything worse than its input.
    pub p: DMatrix<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Runs the augmented-Lagrangian loop until both the primal residual
/// ‖P−Q‖_∞ and the iterate change ‖P−P_prev‖_∞ fall below ε.
///
/// The primal residual alone is not a usable stop signal: with μ = 0 the
/// soft-threshold step collapses to P = Q − T/κ, which zeroes the multiplier
/// and makes ‖P−Q‖ vanish identically from the first iteration onward, long
/// before the iterates stabilize. Exhausting `max_iters` is reported through
/// `converged = false`, not an error.
pub fn solve_p_subproblem(
    problem: &PSubproblem,
    params: &IalmParams,
    p_init: Option<&DMatrix<f64>>,
) -> Result<PSolution> {
    problem.validate()?;
    params.validate()?;
    let (n, c) = (problem.basis_len(), problem.class_count());
    let mut p = match p_init {
        Some(init) => {
            if init.nrows() != n || init.ncols() != c {
                return Err(Error::dims(
                    "p_init",
                    format!("{n}x{c}"),
                    format!("{}x{}", init.nrows(), init.ncols()),
                ));
            }
            init.clone()
        }
        None => DMatrix::zeros(n, c),
    };
    let mut t = DMatrix::zeros(n, c);
    let mut kappa = params.kappa_init;

    let solver = ShiftedSolver::new(problem)?;
    let rhs_fit = rhs_base(problem);

    let mut best_obj = problem.objective(&p);
    let mut best_p = p.clone();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..params.max_iters {
        iterations += 1;
        let rhs = &rhs_fit + 0.5 * (&t + kappa * &p);
        let q = solver.solve(&rhs, 0.5 * kappa);

        let threshold = problem.mu / kappa;
        let p_prev = std::mem::replace(
            &mut p,
            (&q - &t / kappa).map(|v| soft_threshold(v, threshold)),
        );

        t += kappa * (&p - &q);
        kappa = (params.rho * kappa).min(params.kappa_max);

        let obj = problem.objective(&p);
        if obj < best_obj {
            best_obj = obj;
            best_p.copy_from(&p);
        }

        let primal = (&p - &q).amax();
        let step = (&p - &p_prev).amax();
        if primal < params.epsilon && step < params.epsilon {
            converged = true;
            break;
        }
    }

    Ok(PSolution {
        p: best_p,
        objective: best_obj,
        converged,
        iterations,
    })
}
