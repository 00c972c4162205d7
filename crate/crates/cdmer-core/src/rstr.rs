//! Region selective transfer regression.
//!
//! A kernelized regression from labeled source samples to one-hot class
//! vectors, trained jointly with non-negative per-region weights. Three
//! regularizers shape the fit: an L1 penalty on the region weights (region
//! selection), an L1 penalty on the coefficients (sparse reconstruction), and
//! a relaxed maximum-mean-discrepancy term that pulls the projected source
//! and target means together so the regression transfers across databases.
//!
//! Training alternates two convex subproblems until the objective
//!
//!   ‖L − PᵀΣᵢwᵢKᵢˢ‖²_F + λ‖w‖₁ + μ‖P‖₁ + γ‖Σᵢ wᵢ Pᵀ((1/N_s)Kᵢˢ1 − (1/N_t)Kᵢᵗ1)‖²₂
//!
//! stabilizes: coefficients P via the augmented-Lagrangian solver at fixed w,
//! then weights w via the non-negative lasso at fixed P.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    build_kernel_set, build_test_kernels, gram, BlockedFeatureSet, KernelConfig, KernelSet,
};
use crate::optimizer::{
    build_w_design, project_simplex, solve_nonneg_lasso, solve_p_subproblem, IalmParams,
    PSubproblem,
};

/// One-hot class indicators for N labeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    onehot: DMatrix<f64>,
    class_names: Vec<String>,
}

impl LabelMatrix {
    /// Builds the c×N indicator matrix from class indices.
    pub fn from_hard_labels(labels: &[usize], class_names: Vec<String>) -> Result<Self> {
        let c = class_names.len();
        if c < 2 {
            return Err(Error::InvalidParameter(
                "at least two classes are required".into(),
            ));
        }
        if labels.is_empty() {
            return Err(Error::InvalidParameter("no labels given".into()));
        }
        let mut onehot = DMatrix::zeros(c, labels.len());
        for (j, &label) in labels.iter().enumerate() {
            if label >= c {
                return Err(Error::InvalidParameter(format!(
                    "label {label} out of range for {c} classes"
                )));
            }
            onehot[(label, j)] = 1.0;
        }
        Ok(LabelMatrix { onehot, class_names })
    }

    /// Wraps an existing indicator matrix, validating that every column is
    /// one-hot and that row count matches the class-name list.
    pub fn from_onehot(onehot: DMatrix<f64>, class_names: Vec<String>) -> Result<Self> {
        let c = class_names.len();
        if c < 2 || onehot.nrows() != c {
            return Err(Error::dims(
                "label matrix",
                format!("{c} rows"),
                format!("{} rows", onehot.nrows()),
            ));
        }
        if onehot.ncols() == 0 {
            return Err(Error::InvalidParameter("no labeled samples".into()));
        }
        for j in 0..onehot.ncols() {
            let col = onehot.column(j);
            let ones = col.iter().filter(|&&v| v == 1.0).count();
            let zeros = col.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != c {
                return Err(Error::InvalidParameter(format!(
                    "column {j} of the label matrix is not one-hot"
                )));
            }
        }
        Ok(LabelMatrix { onehot, class_names })
    }

    pub fn onehot(&self) -> &DMatrix<f64> {
        &self.onehot
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.onehot.nrows()
    }

    /// Number of labeled samples N.
    pub fn len(&self) -> usize {
        self.onehot.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false // construction enforces N >= 1
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.onehot.ncols())
            .map(|j| {
                self.onehot
                    .column(j)
                    .iter()
                    .position(|&v| v == 1.0)
                    .expect("every column is one-hot")
            })
            .collect()
    }
}

/// Trade-off weights and loop controls for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RstrHyperparams {
    /// L1 weight on the region weights w.
    pub lambda: f64,
    /// L1 weight on the coefficients P.
    pub mu: f64,
    /// Weight of the relaxed mean-discrepancy term.
    pub gamma: f64,
    pub kernel: KernelConfig,
    pub outer_max_iters: usize,
    /// Relative objective-change threshold that stops the outer loop.
    pub outer_tol: f64,
    pub ialm: IalmParams,
}

impl Default for RstrHyperparams {
    fn default() -> Self {
        RstrHyperparams {
            lambda: 1.0,
            mu: 0.5,
            gamma: 0.05,
            kernel: KernelConfig::Linear,
            outer_max_iters: 50,
            outer_tol: 1e-5,
            ialm: IalmParams::default(),
        }
    }
}

impl RstrHyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.outer_max_iters == 0 {
            return Err(Error::InvalidParameter("outer_max_iters must be >= 1".into()));
        }
        if !self.outer_tol.is_finite() || self.outer_tol <= 0.0 {
            return Err(Error::InvalidParameter("outer_tol must be positive".into()));
        }
        self.kernel.validate()?;
        self.ialm.validate()
    }
}

/// A fitted transfer regression.
///
/// Keeps the training feature sets because test-time kernels are computed
/// against the joined source+target basis.
#[derive(Debug, Clone)]
pub struct RstrModel {
    pub(crate) p: DMatrix<f64>,
    pub(crate) w: DVector<f64>,
    pub(crate) kernel: KernelConfig,
    pub(crate) train_source: BlockedFeatureSet,
    pub(crate) train_target: BlockedFeatureSet,
    pub(crate) class_names: Vec<String>,
    pub(crate) objective_trace: Vec<f64>,
    pub(crate) converged: bool,
    pub(crate) solver_warnings: usize,
}

impl RstrModel {
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn region_weights(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Whether the outer loop hit its relative-change threshold.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Number of inner solves that exhausted their iteration budget.
    pub fn solver_warnings(&self) -> usize {
        self.solver_warnings
    }

    pub fn train_source(&self) -> &BlockedFeatureSet {
        &self.train_source
    }

    pub fn train_target(&self) -> &BlockedFeatureSet {
        &self.train_target
    }
}

/// Predicted label vectors (columns on the probability simplex) and the
/// corresponding hard class assignments.
#[derive(Debug, Clone)]
pub struct PredictedLabels {
    pub label_vectors: DMatrix<f64>,
    pub hard_labels: Vec<usize>,
}

/// Σᵢ wᵢ Kᵢˢ in block order.
fn combined_source_kernel(kernels: &KernelSet, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(kernels.basis_len(), kernels.n_source());
    for (i, k) in kernels.per_block_source().iter().enumerate() {
        out.axpy_mut(w[i], k);
    }
    out
}

/// Σᵢ wᵢ ((1/N_s)Kᵢˢ1 − (1/N_t)Kᵢᵗ1) in block order.
fn combined_mean_gap(kernels: &KernelSet, w: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(kernels.basis_len());
    for i in 0..kernels.block_count() {
        out.axpy(w[i], &kernels.mean_gap(i), 1.0);
    }
    out
}

trait AxpyMat {
    fn axpy_mut(&mut self, alpha: f64, rhs: &DMatrix<f64>);
}

impl AxpyMat for DMatrix<f64> {
    fn axpy_mut(&mut self, alpha: f64, rhs: &DMatrix<f64>) {
        self.zip_apply(rhs, |out, r| *out += alpha * r);
    }
}

fn check_weight_count(kernels: &KernelSet, w: &DVector<f64>) -> Result<()> {
    if w.len() != kernels.block_count() {
        return Err(Error::dims(
            "region weights",
            kernels.block_count().to_string(),
            w.len().to_string(),
        ));
    }
    Ok(())
}

fn check_coefficients(kernels: &KernelSet, p: &DMatrix<f64>, c: usize) -> Result<()> {
    if p.nrows() != kernels.basis_len() || p.ncols() != c {
        return Err(Error::dims(
            "coefficients",
            format!("{}x{c}", kernels.basis_len()),
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }
    Ok(())
}

/// Full training objective at (P, w).
pub fn objective(
    p: &DMatrix<f64>,
    w: &DVector<f64>,
    kernels: &KernelSet,
    labels: &LabelMatrix,
    hp: &RstrHyperparams,
) -> Result<f64> {
    check_weight_count(kernels, w)?;
    check_coefficients(kernels, p, labels.class_count())?;
    if labels.len() != kernels.n_source() {
        return Err(Error::dims(
            "labels",
            format!("{} samples", kernels.n_source()),
            format!("{} samples", labels.len()),
        ));
    }
    let fit = (labels.onehot() - p.transpose() * combined_source_kernel(kernels, w)).norm_squared();
    let w_l1: f64 = w.iter().map(|v| v.abs()).sum();
    let p_l1: f64 = p.iter().map(|v| v.abs()).sum();
    let gap = relaxed_mmd(p, w, kernels)?;
    Ok(fit + hp.lambda * w_l1 + hp.mu * p_l1 + hp.gamma * gap)
}

/// Squared distance between the projected source and target kernel means:
/// ‖Σᵢ wᵢ Pᵀ((1/N_s)Kᵢˢ1 − (1/N_t)Kᵢᵗ1)‖²₂.
pub fn relaxed_mmd(p: &DMatrix<f64>, w: &DVector<f64>, kernels: &KernelSet) -> Result<f64> {
    check_weight_count(kernels, w)?;
    if p.nrows() != kernels.basis_len() {
        return Err(Error::dims(
            "coefficients",
            format!("{} rows", kernels.basis_len()),
            format!("{} rows", p.nrows()),
        ));
    }
    let gap = combined_mean_gap(kernels, w);
    Ok((p.transpose() * gap).norm_squared())
}

/// Biased empirical maximum mean discrepancy between two raw sample sets:
/// sqrt(mean(K_ss) − 2·mean(K_st) + mean(K_tt)), clamped at zero.
///
/// Diagnostic only; a median-heuristic bandwidth resolves over the joined
/// samples so all three Gram blocks share one kernel.
pub fn mmd(
    source_block: &DMatrix<f64>,
    target_block: &DMatrix<f64>,
    cfg: &KernelConfig,
) -> Result<f64> {
    if source_block.nrows() != target_block.nrows() {
        return Err(Error::dims(
            "mmd inputs",
            format!("d={}", source_block.nrows()),
            format!("d={}", target_block.nrows()),
        ));
    }
    let mut joined = DMatrix::zeros(source_block.nrows(), source_block.ncols() + target_block.ncols());
    joined
        .view_mut((0, 0), source_block.shape())
        .copy_from(source_block);
    joined
        .view_mut((0, source_block.ncols()), target_block.shape())
        .copy_from(target_block);
    let cfg = cfg.resolve(&joined);
    let kss = gram(source_block, source_block, &cfg)?;
    let kst = gram(source_block, target_block, &cfg)?;
    let ktt = gram(target_block, target_block, &cfg)?;
    let v = kss.mean() - 2.0 * kst.mean() + ktt.mean();
    Ok(v.max(0.0).sqrt())
}

/// Fits the transfer regression on labeled source and unlabeled target data.
///
/// Alternates the coefficient and region-weight subproblems, recording the
/// objective after every outer iteration, and stops when the relative
/// objective change drops below `outer_tol`. Inner solvers that exhaust
/// their budget raise the model's warning count instead of failing.
pub fn train(
    source: &BlockedFeatureSet,
    labels: &LabelMatrix,
    target: &BlockedFeatureSet,
    hp: &RstrHyperparams,
) -> Result<RstrModel> {
    hp.validate()?;
    if labels.len() != source.len() {
        return Err(Error::dims(
            "source labels",
            format!("{} samples", source.len()),
            format!("{} samples", labels.len()),
        ));
    }
    let kernels = build_kernel_set(source, target, &hp.kernel)?;
    let n = kernels.basis_len();
    let c = labels.class_count();
    let k = kernels.block_count();

    // Uniform region contribution at the start; coefficients from zero so the
    // first inner solve is a pure data fit.
    let mut w = DVector::from_element(k, 1.0);
    let mut p = DMatrix::zeros(n, c);
    let mut objective_trace = Vec::new();
    let mut converged = false;
    let mut solver_warnings = 0;

    for _ in 0..hp.outer_max_iters {
        let problem = PSubproblem {
            ks_tilde: combined_source_kernel(&kernels, &w),
            kst_tilde: combined_mean_gap(&kernels, &w),
            labels: labels.onehot().clone(),
            mu: hp.mu,
            gamma: hp.gamma,
        };
        let p_sol = solve_p_subproblem(&problem, &hp.ialm, Some(&p))?;
        if !p_sol.converged {
            solver_warnings += 1;
        }
        p = p_sol.p;

        let mut lasso = build_w_design(&p, &kernels, labels, hp.gamma)?;
        lasso.lambda = hp.lambda;
        let w_sol = solve_nonneg_lasso(&lasso, Some(&w))?;
        if !w_sol.converged {
            solver_warnings += 1;
        }
        w = w_sol.w;

        // Predictions depend on (w, P) only through Σᵢ wᵢ Pᵀ Kᵢ, so the loss
        // and mean-gap terms are invariant under (αw, P/α). Balancing the two
        // L1 terms along that direction is an exact descent step; without it
        // the alternation crawls geometrically along the scale ambiguity.
        if hp.lambda > 0.0 && hp.mu > 0.0 {
            let w_l1: f64 = w.iter().map(|v| v.abs()).sum();
            let p_l1: f64 = p.iter().map(|v| v.abs()).sum();
            if w_l1 > 0.0 && p_l1 > 0.0 {
                let alpha = (hp.mu * p_l1 / (hp.lambda * w_l1)).sqrt();
                w *= alpha;
                p /= alpha;
            }
        }

        let obj = objective(&p, &w, &kernels, labels, hp)?;
        let stop = objective_trace
            .last()
            .is_some_and(|prev: &f64| (prev - obj).abs() <= hp.outer_tol * prev.abs().max(1.0));
        objective_trace.push(obj);
        if stop {
            converged = true;
            break;
        }
    }

    Ok(RstrModel {
        p,
        w,
        kernel: hp.kernel,
        train_source: source.clone(),
        train_target: target.clone(),
        class_names: labels.class_names().to_vec(),
        objective_trace,
        converged,
        solver_warnings,
    })
}

/// Index of the largest entry, ties resolved toward the lowest index.
pub(crate) fn argmax_lowest(col: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in col.iter().enumerate().skip(1) {
        if v > col[best] {
            best = i;
        }
    }
    best
}

/// Predicts label vectors for a test set sharing the training block layout.
///
/// Each test sample scores v = PᵀΣᵢwᵢkᵢ, is projected onto the probability
/// simplex, and is assigned the class with the largest projected entry.
pub fn predict(model: &RstrModel, test: &BlockedFeatureSet) -> Result<PredictedLabels> {
    let test_kernels = build_test_kernels(
        &model.train_source,
        &model.train_target,
        test,
        &model.kernel,
    )?;
    let n = model.train_source.len() + model.train_target.len();
    let mut combined = DMatrix::zeros(n, test.len());
    for (i, k) in test_kernels.iter().enumerate() {
        combined.axpy_mut(model.w[i], k);
    }
    let scores = model.p.transpose() * combined;

    let c = scores.nrows();
    let mut label_vectors = DMatrix::zeros(c, test.len());
    let mut hard_labels = Vec::with_capacity(test.len());
    for j in 0..test.len() {
        let projected = project_simplex(&scores.column(j).clone_owned());
        hard_labels.push(argmax_lowest(projected.as_slice()));
        label_vectors.set_column(j, &projected);
    }
    Ok(PredictedLabels {
        label_vectors,
        hard_labels,
    })
}
