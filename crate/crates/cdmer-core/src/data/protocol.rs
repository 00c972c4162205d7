//! The builtin cross-database task catalogue and dataset metadata.
//!
//! Four datasets take part: the three SMIC subsets recorded with different
//! cameras (HS, VIS, NIR) and the selected CASME II subset relabeled onto
//! the SMIC class scheme. TYPE-I tasks pair two SMIC subsets; TYPE-II tasks
//! pair CASME II with one SMIC subset.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One source → target experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub source_id: String,
    pub target_id: String,
    pub type_tag: TaskType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskType {
    #[serde(rename = "TYPE-I")]
    TypeI,
    #[serde(rename = "TYPE-II")]
    TypeII,
}

impl TaskSpec {
    fn new(task_id: &str, source_id: &str, target_id: &str, type_tag: TaskType) -> Self {
        TaskSpec {
            task_id: task_id.into(),
            source_id: source_id.into(),
            target_id: target_id.into(),
            type_tag,
        }
    }
}

/// Per-class sample count, kept in class order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub name: String,
    pub count: usize,
}

impl ClassCount {
    pub fn new(name: &str, count: usize) -> Self {
        ClassCount {
            name: name.into(),
            count,
        }
    }
}

/// Where a dataset's features live and what layout to expect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    #[serde(default)]
    pub class_counts: Vec<ClassCount>,
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub feature_file: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.n == 0 {
            return Err(Error::InvalidParameter(format!(
                "manifest {}: K, d, N must all be at least 1",
                self.dataset_id
            )));
        }
        if !self.class_counts.is_empty() {
            let sum: usize = self.class_counts.iter().map(|c| c.count).sum();
            if sum != self.n {
                return Err(Error::InvalidParameter(format!(
                    "manifest {}: class counts sum to {sum}, N is {}",
                    self.dataset_id, self.n
                )));
            }
        }
        Ok(())
    }
}

/// Block count of the reference multi-scale spatial division: the 1×1, 2×2,
/// 3×3, and 4×4 grids over the face contribute 30 cells in total. Feature
/// sets may use any block count; this is the default layout real extraction
/// pipelines are expected to follow.
pub fn multiscale_grid_block_count() -> usize {
    [1usize, 2, 3, 4].iter().map(|g| g * g).sum()
}

/// The twelve builtin tasks, in protocol order.
///
/// Dataset ids: H = SMIC (HS), V = SMIC (VIS), N = SMIC (NIR),
/// C = Selected CASME II.
pub fn builtin_protocol() -> Vec<TaskSpec> {
    vec![
        TaskSpec::new("Exp.1", "H", "V", TaskType::TypeI),
        TaskSpec::new("Exp.2", "V", "H", TaskType::TypeI),
        TaskSpec::new("Exp.3", "H", "N", TaskType::TypeI),
        TaskSpec::new("Exp.4", "N", "H", TaskType::TypeI),
        TaskSpec::new("Exp.5", "V", "N", TaskType::TypeI),
        TaskSpec::new("Exp.6", "N", "V", TaskType::TypeI),
        TaskSpec::new("Exp.7", "C", "H", TaskType::TypeII),
        TaskSpec::new("Exp.8", "H", "C", TaskType::TypeII),
        TaskSpec::new("Exp.9", "C", "V", TaskType::TypeII),
        TaskSpec::new("Exp.10", "V", "C", TaskType::TypeII),
        TaskSpec::new("Exp.11", "C", "N", TaskType::TypeII),
        TaskSpec::new("Exp.12", "N", "C", TaskType::TypeII),
    ]
}

/// Human-readable name for a builtin dataset id.
pub fn dataset_display_name(id: &str) -> Option<&'static str> {
    Some(match id {
        "H" => "SMIC (HS)",
        "V" => "SMIC (VIS)",
        "N" => "SMIC (NIR)",
        "C" => "Selected CASME II",
        _ => return None,
    })
}

/// Published per-class sample constitution of a builtin dataset.
pub fn builtin_sample_constitution(id: &str) -> Option<Vec<ClassCount>> {
    let (pos, neg, sur) = match id {
        "C" => (32, 73, 25),
        "H" => (51, 70, 43),
        "V" => (23, 28, 20),
        "N" => (23, 28, 20),
        _ => return None,
    };
    Some(vec![
        ClassCount::new("positive", pos),
        ClassCount::new("negative", neg),
        ClassCount::new("surprise", sur),
    ])
}

/// Checks a task list for self-loops and duplicate ids.
pub fn validate_tasks(tasks: &[TaskSpec]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for task in tasks {
        if task.source_id == task.target_id {
            return Err(Error::InvalidParameter(format!(
                "task {}: source and target must differ",
                task.task_id
            )));
        }
        if !seen.insert(task.task_id.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "duplicate task id {}",
                task.task_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_snapshot() {
        let tasks = builtin_protocol();
        assert_eq!(tasks.len(), 12);
        let rows: Vec<(String, String, String, TaskType)> = tasks
            .iter()
            .map(|t| {
                (
                    t.task_id.clone(),
                    t.source_id.clone(),
                    t.target_id.clone(),
                    t.type_tag,
                )
            })
            .collect();
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
        for (row, exp) in rows.iter().zip(expected.iter()) {
            assert_eq!(row.0, exp.0);
            assert_eq!(row.1, exp.1);
            assert_eq!(row.2, exp.2);
            assert_eq!(row.3, exp.3);
        }
        validate_tasks(&tasks).unwrap();
    }

    #[test]
    fn first_task_is_hs_to_vis() {
        let tasks = builtin_protocol();
        assert_eq!(tasks[0].task_id, "Exp.1");
        assert_eq!(dataset_display_name(&tasks[0].source_id), Some("SMIC (HS)"));
        assert_eq!(
            dataset_display_name(&tasks[0].target_id),
            Some("SMIC (VIS)")
        );
    }

    #[test]
    fn every_type_two_task_touches_casme() {
        for task in builtin_protocol() {
            if task.type_tag == TaskType::TypeII {
                assert!(
                    task.source_id == "C" || task.target_id == "C",
                    "{} should involve C",
                    task.task_id
                );
            } else {
                assert!(task.source_id != "C" && task.target_id != "C");
            }
        }
    }

    #[test]
    fn sample_constitutions_match_published_counts() {
        let c = builtin_sample_constitution("C").unwrap();
        assert_eq!(
            c.iter().map(|cc| cc.count).collect::<Vec<_>>(),
            vec![32, 73, 25]
        );
        assert_eq!(c.iter().map(|cc| cc.count).sum::<usize>(), 130);
        let h = builtin_sample_constitution("H").unwrap();
        assert_eq!(h.iter().map(|cc| cc.count).sum::<usize>(), 164);
        for id in ["V", "N"] {
            let counts = builtin_sample_constitution(id).unwrap();
            assert_eq!(counts.iter().map(|cc| cc.count).sum::<usize>(), 71);
        }
        assert!(builtin_sample_constitution("Z").is_none());
    }

    #[test]
    fn task_validation_rejects_loops_and_duplicates() {
        let mut tasks = builtin_protocol();
        tasks[0].target_id = "H".into();
        assert!(validate_tasks(&tasks).is_err());

        let mut tasks = builtin_protocol();
        tasks[1].task_id = "Exp.1".into();
        assert!(validate_tasks(&tasks).is_err());
    }

    #[test]
    fn multiscale_grids_total_thirty_blocks() {
        assert_eq!(multiscale_grid_block_count(), 30);
    }

    #[test]
    fn manifest_requires_consistent_counts() {
        let manifest = DatasetManifest {
            dataset_id: "H".into(),
            class_counts: builtin_sample_constitution("H").unwrap(),
            k: 30,
            d: 59,
            n: 164,
            feature_file: "h.features".into(),
        };
        manifest.validate().unwrap();
        let bad = DatasetManifest { n: 100, ..manifest };
        assert!(bad.validate().is_err());
    }
}
