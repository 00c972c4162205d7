//! Non-negative lasso by cyclic coordinate descent, plus the stacking that
//! turns the region-weight subproblem into one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::rstr::LabelMatrix;

/// min_w ‖y − Dw‖²₂ + λ‖w‖₁, optionally subject to w ⪰ 0.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    pub y: DVector<f64>,
    pub design: DMatrix<f64>,
    pub lambda: f64,
    pub nonneg: bool,
}

impl LassoProblem {
    pub fn validate(&self) -> Result<()> {
        if self.design.nrows() != self.y.len() {
            return Err(Error::dims(
                "lasso design",
                format!("{} rows", self.y.len()),
                format!("{} rows", self.design.nrows()),
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(
                "lambda must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        (&self.y - &self.design * w).norm_squared() + self.lambda * w.iter().map(|v| v.abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub w: DVector<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 10_000;

/// Cyclic coordinate descent with exact per-coordinate minimization.
///
/// Each update solves the one-dimensional problem in closed form (clamped to
/// zero under the non-negativity constraint), so the objective never
/// increases. Stops when the stationarity residual
/// 2dᵢᵀ(Dw−y) + λ·∂|wᵢ| is small for every coordinate, or when a full sweep
/// leaves w unchanged.
pub fn solve_nonneg_lasso(
    problem: &LassoProblem,
    w_init: Option<&DVector<f64>>,
) -> Result<LassoSolution> {
    problem.validate()?;
    let k = problem.design.ncols();
    let mut w = match w_init {
        Some(init) => {
            if init.len() != k {
                return Err(Error::dims("w_init", k.to_string(), init.len().to_string()));
            }
            if problem.nonneg && init.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidParameter(
                    "w_init must be non-negative for the constrained problem".into(),
                ));
            }
            init.clone()
        }
        None => DVector::from_element(k, 1.0),
    };
    if k == 0 {
        return Ok(LassoSolution {
            w,
            converged: true,
            sweeps: 0,
        });
    }

    // Sufficient statistics: G = DᵀD, h = Dᵀy; Gw is maintained incrementally.
    let g = problem.design.transpose() * &problem.design;
    let h = problem.design.transpose() * &problem.y;
    let mut gw = &g * &w;
    let lambda = problem.lambda;
    let tol = 1e-9 * (1.0 + 2.0 * h.amax() + lambda);

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut changed = false;
        for i in 0..k {
            let gii = g[(i, i)];
            let new = if gii <= 0.0 {
                0.0
            } else {
                // Partial residual correlation with coordinate i removed.
                let rho = h[i] - (gw[i] - gii * w[i]);
                if problem.nonneg {
                    ((rho - 0.5 * lambda) / gii).max(0.0)
                } else {
                    let shifted = rho.abs() - 0.5 * lambda;
                    if shifted <= 0.0 {
                        0.0
                    } else {
                        rho.signum() * shifted / gii
                    }
                }
            };
            let delta = new - w[i];
            if delta != 0.0 {
                gw.axpy(delta, &g.column(i).clone_owned(), 1.0);
                w[i] = new;
                changed = true;
            }
        }

        let residual = kkt_residual(&g, &h, &w, lambda, problem.nonneg, &gw);
        if residual <= tol || !changed {
            converged = true;
            break;
        }
    }

    Ok(LassoSolution {
        w,
        converged,
        sweeps,
    })
}

fn kkt_residual(
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    w: &DVector<f64>,
    lambda: f64,
    nonneg: bool,
    gw: &DVector<f64>,
) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        if g[(i, i)] <= 0.0 {
            continue;
        }
        let grad = 2.0 * (gw[i] - h[i]);
        let v = if nonneg {
            if w[i] > 0.0 {
                (grad + lambda).abs()
            } else {
                (-(grad + lambda)).max(0.0)
            }
        } else if w[i] != 0.0 {
            (grad + lambda * w[i].signum()).abs()
        } else {
            (grad.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Stacks the region-weight subproblem at fixed coefficients P into a
/// non-negative lasso.
///
/// With z = vec(L) and per-block columns aᵢ = vec(PᵀKᵢˢ) and
/// bᵢ = Pᵀ((1/N_s)Kᵢˢ1 − (1/N_t)Kᵢᵗ1), the stacked system
/// y = [z; 0], D = [A; √γ·B] satisfies ‖y − Dw‖² = ‖z − Aw‖² + γ‖Bw‖².
/// The L1 weight is left at zero for the caller to fill in.
pub fn build_w_design(
    p: &DMatrix<f64>,
    kernels: &KernelSet,
    labels: &LabelMatrix,
    gamma: f64,
) -> Result<LassoProblem> {
    let n = kernels.basis_len();
    let ns = kernels.n_source();
    let c = labels.class_count();
    if p.nrows() != n {
        return Err(Error::dims(
            "coefficients",
            format!("{n} rows"),
            format!("{} rows", p.nrows()),
        ));
    }
    if labels.len() != ns {
        return Err(Error::dims(
            "labels",
            format!("{ns} samples"),
            format!("{} samples", labels.len()),
        ));
    }
    if p.ncols() != c {
        return Err(Error::dims(
            "coefficients",
            format!("{c} columns"),
            format!("{} columns", p.ncols()),
        ));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidParameter(
            "gamma must be finite and >= 0".into(),
        ));
    }

    let k = kernels.block_count();
    let rows = c * ns + c;
    let mut design = DMatrix::zeros(rows, k);
    let sqrt_gamma = gamma.sqrt();
    for i in 0..k {
        let fit = p.transpose() * &kernels.per_block_source()[i];
        let gap = p.transpose() * kernels.mean_gap(i);
        let mut col = design.column_mut(i);
        for (r, v) in fit.iter().enumerate() {
            col[r] = *v; // column-major vec(PᵀKᵢˢ)
        }
        for (r, v) in gap.iter().enumerate() {
            col[c * ns + r] = sqrt_gamma * *v;
        }
    }

    let mut y = DVector::zeros(rows);
    for (r, v) in labels.onehot().iter().enumerate() {
        y[r] = *v; // column-major vec(L)
    }

    Ok(LassoProblem {
        y,
        design,
        lambda: 0.0,
        nonneg: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_kernel_set, BlockedFeatureSet, DomainTag, KernelConfig};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn design_fixture(
        rng: &mut StdRng,
        k: usize,
        ns: usize,
        nt: usize,
        c: usize,
    ) -> (KernelSet, LabelMatrix) {
        let d = 3;
        let mk = |rng: &mut StdRng, n: usize, tag| {
            let blocks = (0..k)
                .map(|_| nalgebra::DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0)))
                .collect();
            let ids = (0..n).map(|i| format!("s{i}")).collect();
            BlockedFeatureSet::new(blocks, tag, ids).unwrap()
        };
        let src = mk(rng, ns, DomainTag::Source);
        let tgt = mk(rng, nt, DomainTag::Target);
        let kernels = build_kernel_set(&src, &tgt, &KernelConfig::Linear).unwrap();
        let hard: Vec<usize> = (0..ns).map(|i| i % c).collect();
        let names = (0..c).map(|i| format!("c{i}")).collect();
        let labels = LabelMatrix::from_hard_labels(&hard, names).unwrap();
        (kernels, labels)
    }

    #[test]
    fn zero_coefficients_give_zero_design() {
        let mut rng = StdRng::seed_from_u64(40);
        let (kernels, labels) = design_fixture(&mut rng, 1, 4, 3, 2);
        let p = nalgebra::DMatrix::zeros(7, 2);
        let problem = build_w_design(&p, &kernels, &labels, 0.7).unwrap();
        assert_eq!(problem.design.amax(), 0.0);
        assert!(problem.nonneg);
        // y = [vec(L); 0]
        assert_eq!(problem.y.len(), 2 * 4 + 2);
        for (r, v) in labels.onehot().iter().enumerate() {
            assert_eq!(problem.y[r], *v);
        }
        assert_eq!(problem.y.rows(8, 2).amax(), 0.0);
    }

    #[test]
    fn zero_gamma_zeroes_the_bottom_block() {
        let mut rng = StdRng::seed_from_u64(41);
        let (kernels, labels) = design_fixture(&mut rng, 3, 5, 4, 2);
        let p = nalgebra::DMatrix::from_fn(9, 2, |_, _| rng.random_range(-1.0..1.0));
        let problem = build_w_design(&p, &kernels, &labels, 0.0).unwrap();
        let c = 2;
        let ns = 5;
        assert_eq!(problem.design.rows(c * ns, c).amax(), 0.0);
        assert!(problem.design.rows(0, c * ns).amax() > 0.0);
    }

    // Identity check: the stacked least squares reproduces the split
    // objective ‖z − Aw‖² + γ‖Bw‖² for random weights.
    #[test]
    fn stacking_preserves_the_split_objective() {
        let mut rng = StdRng::seed_from_u64(42);
        let (kernels, labels) = design_fixture(&mut rng, 3, 5, 4, 3);
        let gamma = 1.7;
        let p = nalgebra::DMatrix::from_fn(9, 3, |_, _| rng.random_range(-1.0..1.0));
        let problem = build_w_design(&p, &kernels, &labels, gamma).unwrap();
        for _ in 0..10 {
            let w = DVector::from_fn(3, |_, _| rng.random_range(0.0..2.0));
            let stacked = (&problem.y - &problem.design * &w).norm_squared();

            let mut fit = labels.onehot().clone();
            for i in 0..3 {
                fit -= w[i] * (p.transpose() * &kernels.per_block_source()[i]);
            }
            let mut gap = DVector::zeros(3);
            for i in 0..3 {
                gap += w[i] * (p.transpose() * kernels.mean_gap(i));
            }
            let split = fit.norm_squared() + gamma * gap.norm_squared();
            assert_relative_eq!(stacked, split, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    fn random_lasso(rng: &mut StdRng, rows: usize, vars: usize, lambda: f64) -> LassoProblem {
        LassoProblem {
            y: DVector::from_fn(rows, |_, _| rng.random_range(-2.0..2.0)),
            design: DMatrix::from_fn(rows, vars, |_, _| rng.random_range(-1.0..1.0)),
            lambda,
            nonneg: true,
        }
    }

    fn max_kkt_violation(problem: &LassoProblem, w: &DVector<f64>) -> f64 {
        let grad = 2.0 * problem.design.transpose() * (&problem.design * w - &problem.y);
        let mut worst = 0.0f64;
        for i in 0..w.len() {
            let v = if w[i] > 0.0 {
                (grad[i] + problem.lambda).abs()
            } else {
                (-(grad[i] + problem.lambda)).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    }

    #[test]
    fn identity_design_closed_form() {
        let problem = LassoProblem {
            y: DVector::from_column_slice(&[3.0, -1.0]),
            design: DMatrix::identity(2, 2),
            lambda: 2.0,
            nonneg: true,
        };
        let sol = solve_nonneg_lasso(&problem, None).unwrap();
        assert_relative_eq!(sol.w[0], 2.0, max_relative = 1e-12);
        assert_eq!(sol.w[1], 0.0);
    }

    #[test]
    fn dominant_lambda_zeroes_solution() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..5 {
            let mut problem = random_lasso(&mut rng, 12, 6, 0.0);
            let corr = problem.design.transpose() * &problem.y;
            problem.lambda = 2.0 * corr.max().max(0.0) + 1e-9;
            let sol = solve_nonneg_lasso(&problem, None).unwrap();
            assert_eq!(sol.w.amax(), 0.0);
        }
    }

    // Oracle: exhaustive grid search over [0,5]^2 at step 1e-3, evaluated
    // through the expanded quadratic so the scan stays cheap.
    #[test]
    fn two_variable_instances_match_grid_search() {
        let mut rng = StdRng::seed_from_u64(32);
        for trial in 0..3 {
            let problem = random_lasso(&mut rng, 8, 2, 0.7);
            let sol = solve_nonneg_lasso(&problem, None).unwrap();
            let got = problem.objective(&sol.w);

            let g = problem.design.transpose() * &problem.design;
            let h = problem.design.transpose() * &problem.y;
            let yy = problem.y.norm_squared();
            let mut best = f64::INFINITY;
            for i in 0..=5000usize {
                let w0 = i as f64 * 1e-3;
                for j in 0..=5000usize {
                    let w1 = j as f64 * 1e-3;
                    let quad = g[(0, 0)] * w0 * w0
                        + 2.0 * g[(0, 1)] * w0 * w1
                        + g[(1, 1)] * w1 * w1;
                    let obj = yy - 2.0 * (h[0] * w0 + h[1] * w1)
                        + quad
                        + problem.lambda * (w0 + w1);
                    if obj < best {
                        best = obj;
                    }
                }
            }
            assert!(
                got <= best + 1e-6,
                "trial {trial}: solver {got} vs grid {best}"
            );
        }
    }

    #[test]
    fn kkt_residuals_hold_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(33);
        for trial in 0..20 {
            let vars = rng.random_range(2..=20);
            let rows = rng.random_range(vars..=40);
            let lambda = rng.random_range(0.0..3.0);
            let problem = random_lasso(&mut rng, rows, vars, lambda);
            let sol = solve_nonneg_lasso(&problem, None).unwrap();
            assert!(sol.converged, "trial {trial} did not converge");
            assert!(sol.w.iter().all(|&v| v >= 0.0));
            let viol = max_kkt_violation(&problem, &sol.w);
            assert!(viol <= 1e-5, "trial {trial}: KKT violation {viol}");
        }
    }

    #[test]
    fn unconstrained_mode_allows_negative_weights() {
        let problem = LassoProblem {
            y: DVector::from_column_slice(&[-3.0]),
            design: DMatrix::from_column_slice(1, 1, &[1.0]),
            lambda: 0.0,
            nonneg: false,
        };
        let sol = solve_nonneg_lasso(&problem, Some(&DVector::zeros(1))).unwrap();
        assert_relative_eq!(sol.w[0], -3.0, max_relative = 1e-10);
    }

    #[test]
    fn rejects_negative_init_when_constrained() {
        let problem = LassoProblem {
            y: DVector::zeros(2),
            design: DMatrix::identity(2, 2),
            lambda: 0.0,
            nonneg: true,
        };
        let init = DVector::from_column_slice(&[-0.1, 0.0]);
        assert!(solve_nonneg_lasso(&problem, Some(&init)).is_err());
    }

    #[test]
    fn warm_start_never_increases_objective() {
        let mut rng = StdRng::seed_from_u64(34);
        for _ in 0..10 {
            let problem = random_lasso(&mut rng, 10, 5, 0.4);
            let init = DVector::from_fn(5, |_, _| rng.random_range(0.0..2.0));
            let sol = solve_nonneg_lasso(&problem, Some(&init)).unwrap();
            assert!(problem.objective(&sol.w) <= problem.objective(&init) + 1e-12);
        }
    }
}
