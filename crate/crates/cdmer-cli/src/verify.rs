//! Desk-scale verification suite: solver oracles, invariants, and synthetic
//! end-to-end behavior, each with pinned tolerances and runtime budgets.
//!
//! Every check regenerates its own random instances from the given seed and
//! evaluates its oracle independently of the code path under test.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use cdmer_core::baseline::{predict_baseline, train_baseline};
use cdmer_core::data::{builtin_protocol, generate_synthetic, save_features, ClassCount,
    DatasetManifest, SyntheticShiftConfig, TaskType};
use cdmer_core::kernels::{build_kernel_set, BlockedFeatureSet, DomainTag};
use cdmer_core::metrics::{accuracy, confusion, mean_f1, ConfusionMatrix};
use cdmer_core::optimizer::{
    project_simplex, solve_nonneg_lasso, solve_p_subproblem, solve_q, soft_threshold, IalmParams,
    LassoProblem, PSubproblem,
};
use cdmer_core::rstr::{predict, relaxed_mmd, train, RstrHyperparams};

use crate::config::{Method, RstrMode, RunConfig, TaskSelection};
use crate::report::{format_cell, render_json, render_tsv};
use crate::runner::{run_protocol, select_best};

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub elapsed_s: f64,
    pub budget_s: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}: {} ({:.2}s of {:.0}s budget)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.details,
            self.elapsed_s,
            self.budget_s
        )
    }
}

struct Check {
    id: usize,
    name: &'static str,
    budget_s: f64,
    start: Instant,
}

impl Check {
    fn new(id: usize, name: &'static str, budget_s: f64) -> Self {
        Check {
            id,
            name,
            budget_s,
            start: Instant::now(),
        }
    }

    fn finish(self, passed: bool, details: String) -> CriterionResult {
        let elapsed_s = self.start.elapsed().as_secs_f64();
        CriterionResult {
            id: self.id,
            name: self.name,
            passed: passed && elapsed_s < self.budget_s,
            details,
            elapsed_s,
            budget_s: self.budget_s,
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    0.5 * (sorted[sorted.len() / 2] + sorted[(sorted.len() - 1) / 2])
}

/// Runs all criteria in order. Criteria 7 and 8 share one batch of runs.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    let mut out = Vec::with_capacity(11);
    out.push(criterion_1_soft_threshold(seed));
    out.push(criterion_2_q_stationarity(seed));
    out.push(criterion_3_ialm_least_squares(seed));
    out.push(criterion_4_lasso_kkt(seed));
    out.push(criterion_5_simplex(seed));
    out.push(criterion_6_monotone_trace(seed));
    let (c7, c8) = criterion_7_and_8_adaptation(seed);
    out.push(c7);
    out.push(c8);
    out.push(criterion_9_no_shift(seed));
    out.push(criterion_10_metrics(seed));
    out.push(criterion_11_protocol(seed));
    out
}

/// 10 000 random pairs against the piecewise shrinkage definition.
pub fn criterion_1_soft_threshold(seed: u64) -> CriterionResult {
    let check = Check::new(1, "soft-threshold oracle", 1.0);
    let mut rng = StdRng::seed_from_u64(seed ^ 0x01);
    let mut mismatches = 0usize;
    for _ in 0..10_000 {
        let a: f64 = rng.random_range(-100.0..100.0);
        let zeta: f64 = rng.random_range(0.0..50.0);
        let expected = if a > zeta {
            a - zeta
        } else if a < -zeta {
            a + zeta
        } else {
            0.0
        };
        if soft_threshold(a, zeta) != expected {
            mismatches += 1;
        }
    }
    check.finish(
        mismatches == 0,
        format!("{mismatches} mismatches over 10000 pairs"),
    )
}

fn random_subproblem(rng: &mut StdRng, ns: usize, nt: usize, c: usize, mu: f64, gamma: f64) -> PSubproblem {
    let n = ns + nt;
    PSubproblem {
        ks_tilde: DMatrix::from_fn(n, ns, |_, _| rng.random_range(-1.0..1.0)),
        kst_tilde: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
        labels: DMatrix::from_fn(c, ns, |r, col| if col % c == r { 1.0 } else { 0.0 }),
        mu,
        gamma,
    }
}

/// Smooth step objective used by the finite-difference oracle.
fn q_objective(p: &PSubproblem, q: &DMatrix<f64>, pp: &DMatrix<f64>, t: &DMatrix<f64>, kappa: f64) -> f64 {
    (&p.labels - q.transpose() * &p.ks_tilde).norm_squared()
        + p.gamma * (q.transpose() * &p.kst_tilde).norm_squared()
        + (t.transpose() * (pp - q)).trace()
        + 0.5 * kappa * (pp - q).norm_squared()
}

fn q_gradient_fd(p: &PSubproblem, q: &DMatrix<f64>, pp: &DMatrix<f64>, t: &DMatrix<f64>, kappa: f64) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for r in 0..q.nrows() {
        for c in 0..q.ncols() {
            let mut plus = q.clone();
            plus[(r, c)] += h;
            let mut minus = q.clone();
            minus[(r, c)] -= h;
            let g = (q_objective(p, &plus, pp, t, kappa) - q_objective(p, &minus, pp, t, kappa))
                / (2.0 * h);
            worst = worst.max(g.abs());
        }
    }
    worst
}

/// Central finite differences certify the closed-form step as stationary.
pub fn criterion_2_q_stationarity(seed: u64) -> CriterionResult {
    let check = Check::new(2, "q-step stationarity", 5.0);
    let mut rng = StdRng::seed_from_u64(seed ^ 0x02);
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let gamma = rng.random_range(0.2..2.0);
        let problem = random_subproblem(&mut rng, 6, 6, 3, 0.0, gamma);
        let n = problem.basis_len();
        let p = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let t = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let kappa = rng.random_range(0.3..3.0);
        let q = solve_q(&problem, &p, &t, kappa).expect("solve_q");
        let at_solution = q_gradient_fd(&problem, &q, &p, &t, kappa);
        let probe = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let scale = 1.0 + q_gradient_fd(&problem, &probe, &p, &t, kappa);
        worst_ratio = worst_ratio.max(at_solution / scale);
    }
    check.finish(
        worst_ratio <= 1e-6,
        format!("worst scaled gradient {worst_ratio:.3e} (<= 1e-6)"),
    )
}

/// With both regularizers off, the solver must match the normal equations.
pub fn criterion_3_ialm_least_squares(seed: u64) -> CriterionResult {
    let check = Check::new(3, "ialm vs ridge oracle", 10.0);
    let mut rng = StdRng::seed_from_u64(seed ^ 0x03);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let problem = random_subproblem(&mut rng, 6, 6, 3, 0.0, 0.0);
        let n = problem.basis_len();
        let sol = solve_p_subproblem(&problem, &IalmParams::default(), None).expect("solve");
        let gram = &problem.ks_tilde * problem.ks_tilde.transpose()
            + DMatrix::identity(n, n) * 1e-10;
        let rhs = &problem.ks_tilde * problem.labels.transpose();
        let oracle = gram.cholesky().expect("spd").solve(&rhs);
        worst = worst.max((&sol.p - &oracle).amax());
    }
    check.finish(
        worst <= 1e-5,
        format!("worst elementwise deviation {worst:.3e} (<= 1e-5)"),
    )
}

fn lasso_kkt_violation(problem: &LassoProblem, w: &DVector<f64>) -> f64 {
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

/// KKT residuals on random instances plus a dense grid oracle on two
/// variables.
pub fn criterion_4_lasso_kkt(seed: u64) -> CriterionResult {
    let check = Check::new(4, "non-negative lasso kkt", 30.0);
    let mut rng = StdRng::seed_from_u64(seed ^ 0x04);
    let mut worst_kkt = 0.0f64;
    for _ in 0..50 {
        let vars = rng.random_range(2..=20);
        let rows = rng.random_range(vars..=40);
        let problem = LassoProblem {
            y: DVector::from_fn(rows, |_, _| rng.random_range(-2.0..2.0)),
            design: DMatrix::from_fn(rows, vars, |_, _| rng.random_range(-1.0..1.0)),
            lambda: rng.random_range(0.0..3.0),
            nonneg: true,
        };
        let sol = solve_nonneg_lasso(&problem, None).expect("lasso");
        worst_kkt = worst_kkt.max(lasso_kkt_violation(&problem, &sol.w));
    }

    let mut worst_grid_gap = 0.0f64;
    for _ in 0..10 {
        let rows = 6;
        let problem = LassoProblem {
            y: DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0)),
            design: DMatrix::from_fn(rows, 2, |_, _| rng.random_range(-0.5..0.5)),
            lambda: rng.random_range(0.0..0.5),
            nonneg: true,
        };
        let sol = solve_nonneg_lasso(&problem, None).expect("lasso");
        let got = problem.objective(&sol.w);

        let g = problem.design.transpose() * &problem.design;
        let h = problem.design.transpose() * &problem.y;
        let yy = problem.y.norm_squared();
        let mut best = f64::INFINITY;
        for i in 0..=5000usize {
            let w0 = i as f64 * 1e-3;
            let base0 = g[(0, 0)] * w0 * w0 - 2.0 * h[0] * w0 + problem.lambda * w0;
            for j in 0..=5000usize {
                let w1 = j as f64 * 1e-3;
                let obj = yy
                    + base0
                    + g[(1, 1)] * w1 * w1
                    + 2.0 * g[(0, 1)] * w0 * w1
                    - 2.0 * h[1] * w1
                    + problem.lambda * w1;
                if obj < best {
                    best = obj;
                }
            }
        }
        worst_grid_gap = worst_grid_gap.max((got - best).abs());
    }

    check.finish(
        worst_kkt <= 1e-5 && worst_grid_gap <= 1e-6,
        format!("worst kkt {worst_kkt:.3e} (<= 1e-5), worst grid gap {worst_grid_gap:.3e} (<= 1e-6)"),
    )
}

/// Feasibility, idempotence, equivariance, argmax preservation, grid oracle.
pub fn criterion_5_simplex(seed: u64) -> CriterionResult {
    let check = Check::new(5, "simplex projection", 5.0);
    let mut rng = StdRng::seed_from_u64(seed ^ 0x05);
    let mut failures = Vec::new();
    for trial in 0..1000 {
        let c = rng.random_range(2..=8);
        let v = DVector::from_fn(c, |_, _| rng.random_range(-10.0..10.0));
        let l = project_simplex(&v);
        if l.iter().any(|&x| x < 0.0) {
            failures.push(format!("trial {trial}: negative entry"));
        }
        if (l.sum() - 1.0).abs() > 1e-12 {
            failures.push(format!("trial {trial}: sum {:.3e}", l.sum() - 1.0));
        }
        if (&project_simplex(&l) - &l).amax() > 1e-12 {
            failures.push(format!("trial {trial}: not idempotent"));
        }
        let mut order: Vec<usize> = (0..c).collect();
        for i in (1..c).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let pv = DVector::from_fn(c, |i, _| v[order[i]]);
        let pl = DVector::from_fn(c, |i, _| l[order[i]]);
        if (&project_simplex(&pv) - &pl).amax() > 1e-12 {
            failures.push(format!("trial {trial}: not equivariant"));
        }
        let m = (0..c).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        let unique = (0..c).all(|i| i == m || v[i] < v[m]);
        let lm = (0..c).max_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap();
        if unique && lm != m {
            failures.push(format!("trial {trial}: argmax moved"));
        }
        if failures.len() > 4 {
            break;
        }
    }

    let mut worst_grid = 0.0f64;
    let mut grid_cases = vec![DVector::from_column_slice(&[0.5, 0.4, -0.3])];
    for _ in 0..4 {
        grid_cases.push(DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0)));
    }
    for v in &grid_cases {
        let l = project_simplex(v);
        let mut best = (f64::INFINITY, [0.0f64; 3]);
        for i in 0..=1000usize {
            for j in 0..=(1000 - i) {
                let a = i as f64 * 1e-3;
                let b = j as f64 * 1e-3;
                let c3 = 1.0 - a - b;
                let d = (a - v[0]).powi(2) + (b - v[1]).powi(2) + (c3 - v[2]).powi(2);
                if d < best.0 {
                    best = (d, [a, b, c3]);
                }
            }
        }
        for k in 0..3 {
            worst_grid = worst_grid.max((l[k] - best.1[k]).abs());
        }
    }
    if worst_grid > 2e-3 {
        failures.push(format!("grid deviation {worst_grid:.3e}"));
    }

    let passed = failures.is_empty();
    let details = if passed {
        format!("1000 vectors clean; worst grid deviation {worst_grid:.3e} (<= 2e-3)")
    } else {
        failures.join("; ")
    };
    check.finish(passed, details)
}

fn shifted_task_config(seed: u64, n_each: usize) -> SyntheticShiftConfig {
    SyntheticShiftConfig {
        seed,
        classes: 3,
        blocks: 6,
        block_dim: 8,
        n_source: n_each,
        n_target: n_each,
        class_separation: 3.0,
        shift_magnitude: 2.0,
        informative_blocks: vec![0, 1],
    }
}

fn verify_hyperparams(lambda: f64) -> RstrHyperparams {
    RstrHyperparams {
        lambda,
        mu: 0.5,
        gamma: 0.05,
        ..RstrHyperparams::default()
    }
}

/// Five synthetic trainings: non-increasing objective trace, convergence
/// within the 50-iteration budget.
pub fn criterion_6_monotone_trace(seed: u64) -> CriterionResult {
    let check = Check::new(6, "block-coordinate monotonicity", 60.0);
    let mut failures = Vec::new();
    let mut max_iters = 0usize;
    for run in 0..5u64 {
        let data = generate_synthetic(&shifted_task_config(seed.wrapping_add(run), 60))
            .expect("synthetic data");
        let model = train(
            &data.source,
            &data.source_labels,
            &data.target,
            &verify_hyperparams(10.0),
        )
        .expect("training");
        let trace = model.objective_trace();
        max_iters = max_iters.max(trace.len());
        for (i, pair) in trace.windows(2).enumerate() {
            if pair[1] > pair[0] + 1e-8 {
                failures.push(format!(
                    "run {run}: trace rises at outer {} ({:.9} -> {:.9})",
                    i + 1,
                    pair[0],
                    pair[1]
                ));
                break;
            }
        }
        if !model.converged() || trace.len() > 50 {
            failures.push(format!(
                "run {run}: converged={} after {} outer iterations",
                model.converged(),
                trace.len()
            ));
        }
    }
    let passed = failures.is_empty();
    let details = if passed {
        format!("5 runs monotone within 1e-8; slowest converged in {max_iters} outer iterations")
    } else {
        failures.join("; ")
    };
    check.finish(passed, details)
}

struct SeedOutcome {
    base_f1: f64,
    rstr_f1: f64,
    informative_mean_weight: f64,
    noise_mean_weight: f64,
}

fn adaptation_seed_outcome(cfg: &SyntheticShiftConfig) -> SeedOutcome {
    let data = generate_synthetic(cfg).expect("synthetic data");
    let truths = data.target_labels.hard_labels();
    let test = data.target.clone().retagged(DomainTag::Test);

    let bmodel = train_baseline(&data.source, &data.source_labels, 1e-6).expect("baseline");
    let bpred = predict_baseline(&bmodel, &test).expect("baseline predict");
    let bcm = confusion(&bpred.hard_labels, &truths, cfg.classes).expect("confusion");
    let base_f1 = mean_f1(&bcm);

    let lambda_grid = [0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0];
    let mut evals = Vec::with_capacity(lambda_grid.len());
    let mut weights = Vec::with_capacity(lambda_grid.len());
    for &lambda in &lambda_grid {
        let model = train(
            &data.source,
            &data.source_labels,
            &data.target,
            &verify_hyperparams(lambda),
        )
        .expect("training");
        let pred = predict(&model, &test).expect("predict");
        let cm = confusion(&pred.hard_labels, &truths, cfg.classes).expect("confusion");
        evals.push((mean_f1(&cm), accuracy(&cm).expect("accuracy")));
        weights.push(model.region_weights().clone());
    }
    let best = select_best(&evals);
    let w = &weights[best];
    let inf: f64 = cfg.informative_blocks.iter().map(|&i| w[i]).sum::<f64>()
        / cfg.informative_blocks.len() as f64;
    let noise_blocks = cfg.noise_blocks();
    let noise: f64 = noise_blocks.iter().map(|&i| w[i]).sum::<f64>() / noise_blocks.len() as f64;
    SeedOutcome {
        base_f1,
        rstr_f1: evals[best].0,
        informative_mean_weight: inf,
        noise_mean_weight: noise,
    }
}

/// Criteria 7 and 8 share one batch: 20 seeds of the shifted task with the
/// region-weight penalty swept over the published decade grid.
pub fn criterion_7_and_8_adaptation(seed: u64) -> (CriterionResult, CriterionResult) {
    let check7 = Check::new(7, "adaptation benefit", 600.0);
    let start = Instant::now();

    let configs: Vec<SyntheticShiftConfig> = (0..20u64)
        .map(|i| shifted_task_config(seed.wrapping_add(i), 90))
        .collect();
    let jobs = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(configs.len());
    let outcomes: Vec<SeedOutcome> = {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Mutex;
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<SeedOutcome>>> =
            Mutex::new((0..configs.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= configs.len() {
                        break;
                    }
                    let outcome = adaptation_seed_outcome(&configs[i]);
                    slots.lock().expect("slot lock")[i] = Some(outcome);
                });
            }
        });
        slots
            .into_inner()
            .expect("slot lock")
            .into_iter()
            .map(|s| s.expect("all seeds evaluated"))
            .collect()
    };

    let diffs: Vec<f64> = outcomes.iter().map(|o| o.rstr_f1 - o.base_f1).collect();
    let rstr: Vec<f64> = outcomes.iter().map(|o| o.rstr_f1).collect();
    let base: Vec<f64> = outcomes.iter().map(|o| o.base_f1).collect();
    let med_diff = median(&diffs);
    let med_gap = median(&rstr) - median(&base);
    let c7 = check7.finish(
        med_diff > 0.0 && med_gap >= 0.05,
        format!(
            "median paired diff {med_diff:.4} (> 0), median gap {med_gap:.4} (>= 0.05) over 20 seeds"
        ),
    );

    let ordered = outcomes
        .iter()
        .filter(|o| o.informative_mean_weight > o.noise_mean_weight)
        .count();
    let c8 = CriterionResult {
        id: 8,
        name: "region selection",
        passed: ordered >= 15,
        details: format!("informative blocks outweigh noise blocks in {ordered}/20 seeds (>= 15)"),
        elapsed_s: start.elapsed().as_secs_f64(),
        budget_s: 600.0,
    };
    (c7, c8)
}

/// Identical source and target: the mean-gap term is exactly zero and the
/// transfer model must not lose to the baseline.
pub fn criterion_9_no_shift(seed: u64) -> CriterionResult {
    let check = Check::new(9, "no-shift sanity", 60.0);
    let cfg = SyntheticShiftConfig {
        shift_magnitude: 0.0,
        ..shifted_task_config(seed ^ 0x09, 60)
    };
    let data = generate_synthetic(&cfg).expect("synthetic data");
    let target = BlockedFeatureSet::new(
        data.source.blocks().to_vec(),
        DomainTag::Target,
        data.source.sample_ids().to_vec(),
    )
    .expect("target copy");
    let truths = data.source_labels.hard_labels();
    let test = target.clone().retagged(DomainTag::Test);

    let hp = verify_hyperparams(1.0);
    let model = train(&data.source, &data.source_labels, &target, &hp).expect("training");
    let kernels = build_kernel_set(&data.source, &target, &hp.kernel).expect("kernels");
    let gap = relaxed_mmd(model.coefficients(), model.region_weights(), &kernels)
        .expect("relaxed mmd");
    let label_norm = data.source_labels.onehot().norm_squared();

    let rstr_pred = predict(&model, &test).expect("predict");
    let rstr_cm = confusion(&rstr_pred.hard_labels, &truths, cfg.classes).expect("confusion");
    let rstr_acc = accuracy(&rstr_cm).expect("accuracy");

    let bmodel = train_baseline(&data.source, &data.source_labels, 1e-6).expect("baseline");
    let bpred = predict_baseline(&bmodel, &test).expect("baseline predict");
    let bcm = confusion(&bpred.hard_labels, &truths, cfg.classes).expect("confusion");
    let base_acc = accuracy(&bcm).expect("accuracy");

    let gap_ok = gap <= 1e-8 * label_norm;
    let acc_ok = (rstr_acc - base_acc).abs() <= 5.0;
    check.finish(
        gap_ok && acc_ok,
        format!(
            "relaxed mmd {gap:.3e} (<= {:.3e}), accuracy {rstr_acc:.2} vs baseline {base_acc:.2} (within 5)",
            1e-8 * label_norm
        ),
    )
}

fn naive_metrics(preds: &[usize], truths: &[usize], classes: usize) -> (f64, f64) {
    let mut f1_sum = 0.0;
    for class in 0..classes {
        let tp = preds
            .iter()
            .zip(truths)
            .filter(|(&p, &t)| p == class && t == class)
            .count() as f64;
        let predicted = preds.iter().filter(|&&p| p == class).count() as f64;
        let actual = truths.iter().filter(|&&t| t == class).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    let correct = preds.iter().zip(truths).filter(|(&p, &t)| p == t).count() as f64;
    (
        f1_sum / classes as f64,
        100.0 * correct / preds.len() as f64,
    )
}

fn cm_from_counts(rows: &[&[u64]]) -> ConfusionMatrix {
    let classes = rows.len();
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for (t, row) in rows.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            for _ in 0..count {
                truths.push(t);
                preds.push(p);
            }
        }
    }
    confusion(&preds, &truths, classes).expect("fixture confusion")
}

/// Random fixtures against a naive per-sample recomputation, plus the
/// hand-computed fixtures.
pub fn criterion_10_metrics(seed: u64) -> CriterionResult {
    let check = Check::new(10, "metrics oracle", 1.0);
    let mut rng = StdRng::seed_from_u64(seed ^ 0x0a);
    let mut failures = Vec::new();
    for trial in 0..100 {
        let classes = rng.random_range(2..=5);
        let len = rng.random_range(30..=150);
        let preds: Vec<usize> = (0..len).map(|_| rng.random_range(0..classes)).collect();
        let truths: Vec<usize> = (0..len).map(|_| rng.random_range(0..classes)).collect();
        let cm = confusion(&preds, &truths, classes).expect("confusion");
        let (naive_f1, naive_acc) = naive_metrics(&preds, &truths, classes);
        if mean_f1(&cm) != naive_f1 {
            failures.push(format!("trial {trial}: mean F1 mismatch"));
        }
        if accuracy(&cm).expect("accuracy") != naive_acc {
            failures.push(format!("trial {trial}: accuracy mismatch"));
        }
    }

    let half = cm_from_counts(&[&[5, 5], &[5, 5]]);
    if mean_f1(&half) != 0.5 || accuracy(&half).expect("accuracy") != 50.0 {
        failures.push("2x2 half-error fixture".into());
    }
    let skew = cm_from_counts(&[&[4, 1, 0], &[2, 3, 0], &[0, 0, 0]]);
    let p0: f64 = 4.0 / 6.0;
    let r0: f64 = 4.0 / 5.0;
    let p1: f64 = 3.0 / 4.0;
    let r1: f64 = 3.0 / 5.0;
    let expect = (2.0 * p0 * r0 / (p0 + r0) + 2.0 * p1 * r1 / (p1 + r1)) / 3.0;
    if (mean_f1(&skew) - expect).abs() > 1e-15 || accuracy(&skew).expect("accuracy") != 70.0 {
        failures.push("3-class unpredicted-class fixture".into());
    }
    if mean_f1(&skew) >= accuracy(&skew).expect("accuracy") / 100.0 {
        failures.push("unpredicted class should pull mean F1 below accuracy".into());
    }
    let trace71 = cm_from_counts(&[&[40, 9], &[20, 31]]);
    if accuracy(&trace71).expect("accuracy") != 71.0 {
        failures.push("71% fixture".into());
    }

    let passed = failures.is_empty();
    let details = if passed {
        "100 random fixtures match the naive recomputation exactly; hand fixtures hold".into()
    } else {
        failures.join("; ")
    };
    check.finish(passed, details)
}

fn cell_is_well_formed(cell: &str) -> bool {
    let Some((f1, acc)) = cell.split_once(" / ") else {
        return false;
    };
    let f1_ok = f1.split_once('.').is_some_and(|(int, frac)| {
        !int.is_empty()
            && int.chars().all(|c| c.is_ascii_digit())
            && frac.len() == 4
            && frac.chars().all(|c| c.is_ascii_digit())
    });
    let acc_ok = acc.split_once('.').is_some_and(|(int, frac)| {
        !int.is_empty()
            && int.chars().all(|c| c.is_ascii_digit())
            && frac.len() == 2
            && frac.chars().all(|c| c.is_ascii_digit())
    });
    f1_ok && acc_ok
}

/// Builds four synthetic stand-in datasets on disk and returns a config
/// running the builtin tasks over them.
pub fn synthetic_protocol_config(
    dir: &std::path::Path,
    seed: u64,
) -> Result<RunConfig, crate::HarnessError> {
    let data_err = |e: cdmer_core::data::DataError| crate::HarnessError::Data(e.to_string());
    let core_err = |e: cdmer_core::Error| crate::HarnessError::Data(e.to_string());
    let mut manifests = std::collections::BTreeMap::new();
    // Stand-ins share the class geometry and differ by a per-dataset shift,
    // mirroring same-subject camera changes (H/V/N) vs a different
    // collection (C).
    let specs = [("H", 60usize, 0.0f64), ("V", 45, 0.6), ("N", 45, 1.2), ("C", 51, 2.0)];
    for (i, (id, n, shift)) in specs.iter().enumerate() {
        let cfg = SyntheticShiftConfig {
            seed: seed.wrapping_mul(131).wrapping_add(i as u64),
            classes: 3,
            blocks: 6,
            block_dim: 8,
            n_source: 2,
            n_target: *n,
            class_separation: 3.0,
            shift_magnitude: *shift,
            informative_blocks: vec![0, 1],
        };
        let data = generate_synthetic(&cfg).map_err(core_err)?;
        let path = dir.join(format!("{id}.features"));
        save_features(&path, &data.target, Some(&data.target_labels)).map_err(data_err)?;
        let per_class = *n / 3;
        manifests.insert(
            (*id).to_string(),
            DatasetManifest {
                dataset_id: (*id).to_string(),
                class_counts: (0..3)
                    .map(|c| ClassCount::new(&format!("class{c}"), per_class))
                    .collect(),
                k: 6,
                d: 8,
                n: *n,
                feature_file: path,
            },
        );
    }
    Ok(RunConfig {
        tasks: TaskSelection::Builtin,
        manifests,
        method: Method::Both,
        rstr: RstrMode::Fixed(verify_hyperparams(10.0)),
        seed,
        ..RunConfig::default()
    })
}

/// Builtin catalogue snapshot, cell formatting, and byte-identical reruns of
/// a synthetic stand-in protocol.
pub fn criterion_11_protocol(seed: u64) -> CriterionResult {
    let check = Check::new(11, "protocol fidelity", 305.0);
    let mut failures = Vec::new();

    let tasks = builtin_protocol();
    let expected = [
        ("Exp.1", "H", "V", TaskType::TypeI),
        ("Exp.2", "V", "H", TaskType::TypeI),
        ("Exp.3", "H", "N", TaskType::TypeI),
        ("Exp.4", "N", "H", TaskType::TypeI),
        ("Exp.5", "V", "N", TaskType::TypeI),
        ("Exp.6", "N", "V", TaskType::TypeI),
        ("Exp.7", "C", "H", TaskType::TypeII),
        ("Exp.8", "H", "C", TaskType::TypeII),
        ("Exp.9", "C", "V", TaskType::TypeII),
        ("Exp.10", "V", "C", TaskType::TypeII),
        ("Exp.11", "C", "N", TaskType::TypeII),
        ("Exp.12", "N", "C", TaskType::TypeII),
    ];
    if tasks.len() != 12 {
        failures.push(format!("expected 12 tasks, got {}", tasks.len()));
    }
    for (task, exp) in tasks.iter().zip(expected.iter()) {
        if task.task_id != exp.0
            || task.source_id != exp.1
            || task.target_id != exp.2
            || task.type_tag != exp.3
        {
            failures.push(format!("catalogue row {} deviates", exp.0));
        }
    }

    if format_cell(0.73814, 73.979) != "0.7381 / 73.98" {
        failures.push("cell formatting".into());
    }

    match tempfile::tempdir() {
        Ok(dir) => match synthetic_protocol_config(dir.path(), seed ^ 0x0b) {
            Ok(cfg) => match (run_protocol(&cfg), run_protocol(&cfg)) {
                (Ok(first), Ok(second)) => {
                    let tsv1 = render_tsv(&first);
                    let tsv2 = render_tsv(&second);
                    if tsv1 != tsv2 {
                        failures.push("tsv rerun not byte-identical".into());
                    }
                    if render_json(&first) != render_json(&second) {
                        failures.push("json rerun not byte-identical".into());
                    }
                    if first.partial {
                        failures.push("synthetic protocol marked partial".into());
                    }
                    if first.entries.len() != 12 {
                        failures.push(format!("{} report rows", first.entries.len()));
                    }
                    let mut cells = 0;
                    for line in tsv1.lines().skip(3) {
                        let fields: Vec<&str> = line.split('\t').collect();
                        if fields.len() >= 3 && !fields[2].starts_with("error") {
                            cells += 1;
                            if !cell_is_well_formed(fields[2]) {
                                failures.push(format!("malformed cell {:?}", fields[2]));
                            }
                        }
                    }
                    if cells != 26 {
                        // 12 tasks x 2 methods + 2 average rows
                        failures.push(format!("{cells} metric cells, expected 26"));
                    }

                    // Fault injection: corrupting one dataset must surface
                    // the loader error per task without aborting the run.
                    let mut broken = cfg.clone();
                    broken.method = Method::Baseline;
                    let path = &broken.manifests["V"].feature_file;
                    if let Err(e) = std::fs::write(path, "#cdmer-features v1 K=6 d=8 N=0 classes=\n") {
                        failures.push(format!("fault injection write: {e}"));
                    } else {
                        match run_protocol(&broken) {
                            Ok(report) => {
                                let errors = report
                                    .entries
                                    .iter()
                                    .filter(|e| {
                                        e.error.as_deref().is_some_and(|m| m.contains("empty dataset"))
                                    })
                                    .count();
                                if !report.partial || errors != 6 {
                                    failures.push(format!(
                                        "fault injection: partial={} with {errors} loader errors (expected 6)",
                                        report.partial
                                    ));
                                }
                            }
                            Err(e) => failures.push(format!("fault injection aborted the run: {e}")),
                        }
                    }
                }
                (Err(e), _) | (_, Err(e)) => failures.push(format!("protocol run failed: {e}")),
            },
            Err(e) => failures.push(format!("synthetic protocol setup failed: {e}")),
        },
        Err(e) => failures.push(format!("tempdir: {e}")),
    }

    let passed = failures.is_empty();
    let details = if passed {
        "catalogue snapshot, cell format, byte-identical reruns, and loader fault reporting all hold"
            .into()
    } else {
        failures.join("; ")
    };
    check.finish(passed, details)
}
