//! Run configuration: task selection, dataset manifests, method choice, and
//! hyperparameter grids. Loaded from one JSON file; command-line flags
//! override individual fields.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cdmer_core::data::{builtin_protocol, validate_tasks, DatasetManifest, TaskSpec};
use cdmer_core::rstr::RstrHyperparams;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rstr,
    Baseline,
    Both,
}

impl Method {
    pub fn runs_rstr(self) -> bool {
        matches!(self, Method::Rstr | Method::Both)
    }

    pub fn runs_baseline(self) -> bool {
        matches!(self, Method::Baseline | Method::Both)
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rstr" => Ok(Method::Rstr),
            "baseline" => Ok(Method::Baseline),
            "both" => Ok(Method::Both),
            other => Err(format!("unknown method {other:?} (rstr|baseline|both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Tsv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?} (tsv|json)")),
        }
    }
}

/// Which tasks a run covers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskSelection {
    /// The twelve builtin cross-database tasks.
    #[default]
    Builtin,
    /// An explicit task list.
    List(Vec<TaskSpec>),
}

impl TaskSelection {
    pub fn resolve(&self) -> Vec<TaskSpec> {
        match self {
            TaskSelection::Builtin => builtin_protocol(),
            TaskSelection::List(tasks) => tasks.clone(),
        }
    }
}

/// Hyperparameter grids for the sweep, crossed in (lambda, mu, gamma) order.
///
/// The third grid drives `gamma`, the weight of the mean-gap regularizer;
/// `third_grid_target` states that mapping explicitly and only "gamma" is
/// accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrids {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub third_grid_target: String,
    /// Kernel and loop controls shared by every grid point.
    pub base: RstrHyperparams,
}

fn decade_grid() -> Vec<f64> {
    vec![0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0]
}

fn tenth_steps(last_tenths: usize) -> Vec<f64> {
    (1..=last_tenths).map(|i| i as f64 / 10.0).collect()
}

fn hundredth_steps(last_hundredths: usize) -> Vec<f64> {
    (1..=last_hundredths).map(|i| i as f64 / 100.0).collect()
}

impl Default for SweepGrids {
    fn default() -> Self {
        SweepGrids {
            lambda: decade_grid(),
            mu: tenth_steps(50),
            gamma: hundredth_steps(10),
            third_grid_target: "gamma".into(),
            base: RstrHyperparams::default(),
        }
    }
}

impl SweepGrids {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.lambda.is_empty() || self.mu.is_empty() || self.gamma.is_empty() {
            return Err(HarnessError::Config("sweep grids must be non-empty".into()));
        }
        if self.third_grid_target != "gamma" {
            return Err(HarnessError::Config(format!(
                "third_grid_target {:?} unsupported; the third grid maps to \"gamma\"",
                self.third_grid_target
            )));
        }
        self.base
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Grid points in deterministic order: lambda outermost, gamma innermost.
    pub fn points(&self) -> Vec<RstrHyperparams> {
        let mut out = Vec::with_capacity(self.lambda.len() * self.mu.len() * self.gamma.len());
        for &lambda in &self.lambda {
            for &mu in &self.mu {
                for &gamma in &self.gamma {
                    out.push(RstrHyperparams {
                        lambda,
                        mu,
                        gamma,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

/// Rstr hyperparameter source: one fixed point or a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RstrMode {
    Fixed(RstrHyperparams),
    Sweep(SweepGrids),
}

impl Default for RstrMode {
    fn default() -> Self {
        RstrMode::Fixed(RstrHyperparams::default())
    }
}

impl RstrMode {
    pub fn is_sweep(&self) -> bool {
        matches!(self, RstrMode::Sweep(_))
    }

    pub fn points(&self) -> Vec<RstrHyperparams> {
        match self {
            RstrMode::Fixed(hp) => vec![hp.clone()],
            RstrMode::Sweep(grids) => grids.points(),
        }
    }
}

fn default_ridge() -> f64 {
    1e-6
}

fn default_jobs() -> usize {
    1
}

/// Everything one invocation needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub tasks: TaskSelection,
    /// dataset id → manifest; every task endpoint must resolve here.
    pub manifests: BTreeMap<String, DatasetManifest>,
    pub method: Method,
    pub rstr: RstrMode,
    /// Ridge stabilizer for the baseline regression.
    pub ridge: f64,
    pub seed: u64,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
    /// Worker threads for tasks × grid points; output is independent of it.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tasks: TaskSelection::default(),
            manifests: BTreeMap::new(),
            method: Method::Both,
            rstr: RstrMode::default(),
            ridge: default_ridge(),
            seed: 0,
            format: ReportFormat::Tsv,
            out: None,
            jobs: default_jobs(),
        }
    }
}

impl RunConfig {
    /// Reads a JSON config; manifest feature paths are resolved relative to
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{} does not parse: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            for manifest in cfg.manifests.values_mut() {
                if manifest.feature_file.is_relative() {
                    manifest.feature_file = dir.join(&manifest.feature_file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let tasks = self.tasks.resolve();
        if tasks.is_empty() {
            return Err(HarnessError::Config("no tasks selected".into()));
        }
        validate_tasks(&tasks).map_err(|e| HarnessError::Config(e.to_string()))?;
        for task in &tasks {
            for id in [&task.source_id, &task.target_id] {
                if !self.manifests.contains_key(id) {
                    return Err(HarnessError::Config(format!(
                        "task {}: dataset id {id:?} has no manifest",
                        task.task_id
                    )));
                }
            }
        }
        for manifest in self.manifests.values() {
            manifest
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(HarnessError::Config("ridge must be positive".into()));
        }
        if self.jobs == 0 {
            return Err(HarnessError::Config("jobs must be at least 1".into()));
        }
        if let RstrMode::Sweep(grids) = &self.rstr {
            grids.validate()?;
        } else if let RstrMode::Fixed(hp) = &self.rstr {
            hp.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Restricts the run to one task id.
    pub fn select_task(&self, task_id: &str) -> Result<TaskSpec, HarnessError> {
        self.tasks
            .resolve()
            .into_iter()
            .find(|t| t.task_id == task_id)
            .ok_or_else(|| HarnessError::Config(format!("no task with id {task_id:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids_match_published_search_spaces() {
        let grids = SweepGrids::default();
        assert_eq!(grids.lambda, vec![0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0]);
        assert_eq!(grids.mu.len(), 50);
        assert!((grids.mu[0] - 0.1).abs() < 1e-12);
        assert!((grids.mu[49] - 5.0).abs() < 1e-12);
        assert_eq!(grids.gamma.len(), 10);
        assert!((grids.gamma[0] - 0.01).abs() < 1e-12);
        assert!((grids.gamma[9] - 0.1).abs() < 1e-12);
        assert_eq!(grids.points().len(), 3000);
        grids.validate().unwrap();
    }

    #[test]
    fn grid_order_is_lambda_mu_gamma() {
        let grids = SweepGrids {
            lambda: vec![1.0, 2.0],
            mu: vec![0.1],
            gamma: vec![0.01, 0.02],
            ..SweepGrids::default()
        };
        let pts = grids.points();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[0].lambda, pts[0].gamma), (1.0, 0.01));
        assert_eq!((pts[1].lambda, pts[1].gamma), (1.0, 0.02));
        assert_eq!((pts[2].lambda, pts[2].gamma), (2.0, 0.01));
    }

    #[test]
    fn validation_requires_resolvable_ids_and_grids() {
        let cfg = RunConfig::default();
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));

        let grids = SweepGrids {
            lambda: vec![],
            ..SweepGrids::default()
        };
        assert!(grids.validate().is_err());

        let grids = SweepGrids {
            third_grid_target: "mu".into(),
            ..SweepGrids::default()
        };
        assert!(grids.validate().is_err());
    }
}
