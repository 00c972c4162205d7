//! Task execution: load the two datasets, train the requested methods,
//! score on the target, and select sweep winners.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use cdmer_core::baseline::{predict_baseline, train_baseline};
use cdmer_core::data::{load_features, TaskSpec};
use cdmer_core::kernels::{BlockedFeatureSet, DomainTag};
use cdmer_core::metrics::{accuracy, confusion, mean_f1};
use cdmer_core::rstr::{predict, train, LabelMatrix, RstrHyperparams};

use crate::config::RunConfig;
use crate::HarnessError;

/// Condensed view of a training run's objective trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub final_objective: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub solver_warnings: usize,
}

/// The hyperparameters a result was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChosenParams {
    Rstr(RstrHyperparams),
    Baseline { ridge: f64 },
}

impl ChosenParams {
    /// Compact one-line rendering for report cells.
    pub fn describe(&self) -> String {
        match self {
            ChosenParams::Rstr(hp) => {
                format!("lambda={} mu={} gamma={}", hp.lambda, hp.mu, hp.gamma)
            }
            ChosenParams::Baseline { ridge } => format!("ridge={ridge}"),
        }
    }
}

/// One method's scored outcome on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub method: String,
    pub mean_f1: f64,
    pub accuracy: f64,
    pub chosen: ChosenParams,
    pub objective: Option<TraceSummary>,
    /// Measured, not part of rendered reports (they must be byte-stable).
    #[serde(skip)]
    pub wall_time_s: f64,
}

struct LoadedTask {
    source: BlockedFeatureSet,
    source_labels: LabelMatrix,
    target: BlockedFeatureSet,
    test: BlockedFeatureSet,
    truths: Vec<usize>,
    classes: usize,
}

fn load_task(cfg: &RunConfig, task: &TaskSpec) -> Result<LoadedTask, HarnessError> {
    let mut sets = Vec::with_capacity(2);
    for id in [&task.source_id, &task.target_id] {
        let manifest = cfg
            .manifests
            .get(id)
            .ok_or_else(|| HarnessError::Config(format!("dataset id {id:?} has no manifest")))?;
        sets.push(load_features(manifest).map_err(|e| {
            HarnessError::Data(format!("task {}: dataset {id}: {e}", task.task_id))
        })?);
    }
    let (target_set, target_labels) = sets.pop().expect("two sets loaded");
    let (source_set, source_labels) = sets.pop().expect("two sets loaded");

    let source_labels = source_labels.ok_or_else(|| {
        HarnessError::Data(format!(
            "task {}: source dataset {} has no labels",
            task.task_id, task.source_id
        ))
    })?;
    let target_labels = target_labels.ok_or_else(|| {
        HarnessError::Data(format!(
            "task {}: target dataset {} has no labels; scoring needs them",
            task.task_id, task.target_id
        ))
    })?;
    if target_labels.class_names() != source_labels.class_names() {
        return Err(HarnessError::Data(format!(
            "task {}: class lists differ between source and target files",
            task.task_id
        )));
    }
    if source_set.block_count() != target_set.block_count()
        || source_set.block_dim() != target_set.block_dim()
    {
        return Err(HarnessError::Data(format!(
            "task {}: feature layout mismatch (source K={} d={}, target K={} d={})",
            task.task_id,
            source_set.block_count(),
            source_set.block_dim(),
            target_set.block_count(),
            target_set.block_dim()
        )));
    }

    let classes = source_labels.class_count();
    let truths = target_labels.hard_labels();
    Ok(LoadedTask {
        source: source_set.retagged(DomainTag::Source),
        source_labels,
        target: target_set.clone().retagged(DomainTag::Target),
        test: target_set.retagged(DomainTag::Test),
        truths,
        classes,
    })
}

struct GridEval {
    mean_f1: f64,
    accuracy: f64,
    summary: TraceSummary,
}

/// Maps `f` over `0..len` on `jobs` threads, assembling results by index so
/// the output is independent of scheduling.
fn parallel_map<T, F>(len: usize, jobs: usize, f: F) -> Vec<Result<T, HarnessError>>
where
    T: Send,
    F: Fn(usize) -> Result<T, HarnessError> + Sync,
{
    let jobs = jobs.max(1).min(len.max(1));
    if jobs <= 1 {
        return (0..len).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T, HarnessError>>>> =
        Mutex::new((0..len).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= len {
                    break;
                }
                let out = f(i);
                slots.lock().expect("worker poisoned the slot lock")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker poisoned the slot lock")
        .into_iter()
        .map(|slot| slot.expect("every index visited"))
        .collect()
}

fn eval_grid_point(data: &LoadedTask, hp: &RstrHyperparams) -> Result<GridEval, HarnessError> {
    let model = train(&data.source, &data.source_labels, &data.target, hp)
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    let preds = predict(&model, &data.test).map_err(|e| HarnessError::Data(e.to_string()))?;
    let cm = confusion(&preds.hard_labels, &data.truths, data.classes)
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    Ok(GridEval {
        mean_f1: mean_f1(&cm),
        accuracy: accuracy(&cm).map_err(|e| HarnessError::Data(e.to_string()))?,
        summary: TraceSummary {
            final_objective: model.objective_trace().last().copied().unwrap_or(f64::NAN),
            outer_iterations: model.objective_trace().len(),
            converged: model.converged(),
            solver_warnings: model.solver_warnings(),
        },
    })
}

/// Index of the winning grid point: highest mean F1, ties by higher
/// accuracy, then earliest grid position.
pub fn select_best(evals: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(f1, acc)) in evals.iter().enumerate().skip(1) {
        let (bf1, bacc) = evals[best];
        if f1 > bf1 || (f1 == bf1 && acc > bacc) {
            best = i;
        }
    }
    best
}

/// Runs every requested method on one task and scores it on the target.
///
/// Under a sweep, every grid point is trained and the winner is selected on
/// target mean F1 — the protocol's best-result convention, which looks at
/// target labels and is labeled "oracle-selected" in reports.
pub fn run_task(cfg: &RunConfig, task: &TaskSpec) -> Result<Vec<TaskResult>, HarnessError> {
    let data = load_task(cfg, task)?;
    let mut results = Vec::new();

    if cfg.method.runs_rstr() {
        let start = Instant::now();
        let points = cfg.rstr.points();
        let evals = parallel_map(points.len(), cfg.jobs, |i| eval_grid_point(&data, &points[i]));
        let mut oks = Vec::with_capacity(points.len());
        for eval in evals {
            oks.push(eval?);
        }
        let scores: Vec<(f64, f64)> = oks.iter().map(|e| (e.mean_f1, e.accuracy)).collect();
        let best = select_best(&scores);
        results.push(TaskResult {
            task_id: task.task_id.clone(),
            method: "rstr".into(),
            mean_f1: oks[best].mean_f1,
            accuracy: oks[best].accuracy,
            chosen: ChosenParams::Rstr(points[best].clone()),
            objective: Some(oks[best].summary.clone()),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }

    if cfg.method.runs_baseline() {
        let start = Instant::now();
        let model = train_baseline(&data.source, &data.source_labels, cfg.ridge)
            .map_err(|e| HarnessError::Data(e.to_string()))?;
        let preds =
            predict_baseline(&model, &data.test).map_err(|e| HarnessError::Data(e.to_string()))?;
        let cm = confusion(&preds.hard_labels, &data.truths, data.classes)
            .map_err(|e| HarnessError::Data(e.to_string()))?;
        results.push(TaskResult {
            task_id: task.task_id.clone(),
            method: "regression-baseline".into(),
            mean_f1: mean_f1(&cm),
            accuracy: accuracy(&cm).map_err(|e| HarnessError::Data(e.to_string()))?,
            chosen: ChosenParams::Baseline { ridge: cfg.ridge },
            objective: None,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }

    Ok(results)
}

/// One protocol row: a task's results or the error that stopped it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskEntry {
    pub task_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Vec<TaskResult>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAverage {
    pub method: String,
    pub mean_f1: f64,
    pub accuracy: f64,
    pub tasks: usize,
}

/// A full protocol run: per-task rows plus per-method averages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub seed: u64,
    /// How the reported numbers were selected from the grid.
    pub selection: String,
    pub entries: Vec<TaskEntry>,
    pub averages: Vec<MethodAverage>,
    /// True when at least one task failed.
    pub partial: bool,
}

pub fn selection_label(cfg: &RunConfig) -> String {
    if cfg.rstr.is_sweep() && cfg.method.runs_rstr() {
        "oracle-selected (best mean F1 on target labels; ties by accuracy, then grid order)".into()
    } else {
        "fixed hyperparameters".into()
    }
}

/// Runs every configured task, continuing past per-task failures.
pub fn run_protocol(cfg: &RunConfig) -> Result<ProtocolReport, HarnessError> {
    cfg.validate()?;
    let tasks = cfg.tasks.resolve();
    let mut entries = Vec::with_capacity(tasks.len());
    let mut partial = false;
    for task in &tasks {
        match run_task(cfg, task) {
            Ok(results) => entries.push(TaskEntry {
                task_id: task.task_id.clone(),
                results: Some(results),
                error: None,
            }),
            Err(err) => {
                partial = true;
                entries.push(TaskEntry {
                    task_id: task.task_id.clone(),
                    results: None,
                    error: Some(err.to_string()),
                });
            }
        }
    }

    let mut averages = Vec::new();
    for method in ["rstr", "regression-baseline"] {
        let scored: Vec<&TaskResult> = entries
            .iter()
            .filter_map(|e| e.results.as_ref())
            .flatten()
            .filter(|r| r.method == method)
            .collect();
        if scored.is_empty() {
            continue;
        }
        let n = scored.len() as f64;
        averages.push(MethodAverage {
            method: method.into(),
            mean_f1: scored.iter().map(|r| r.mean_f1).sum::<f64>() / n,
            accuracy: scored.iter().map(|r| r.accuracy).sum::<f64>() / n,
            tasks: scored.len(),
        });
    }

    Ok(ProtocolReport {
        seed: cfg.seed,
        selection: selection_label(cfg),
        entries,
        averages,
        partial,
    })
}
