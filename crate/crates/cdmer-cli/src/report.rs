//! Report rendering. Cells follow the benchmark's "mean F1 / accuracy"
//! convention: four decimals for mean F1, two for accuracy.

use crate::runner::ProtocolReport;

pub fn format_cell(mean_f1: f64, accuracy: f64) -> String {
    format!("{mean_f1:.4} / {accuracy:.2}")
}

/// Tab-separated rendering: one row per (task, method), then one Average row
/// per method over its scored tasks.
pub fn render_tsv(report: &ProtocolReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# seed: {}\n", report.seed));
    out.push_str(&format!("# selection: {}\n", report.selection));
    out.push_str("task\tmethod\tmean_f1 / accuracy\tchosen\n");
    for entry in &report.entries {
        match (&entry.results, &entry.error) {
            (Some(results), _) => {
                for r in results {
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{}\n",
                        r.task_id,
                        r.method,
                        format_cell(r.mean_f1, r.accuracy),
                        r.chosen.describe()
                    ));
                }
            }
            (None, Some(err)) => {
                out.push_str(&format!("{}\t-\terror: {}\t\n", entry.task_id, err));
            }
            (None, None) => {
                out.push_str(&format!("{}\t-\terror: unknown\t\n", entry.task_id));
            }
        }
    }
    for avg in &report.averages {
        out.push_str(&format!(
            "Average\t{}\t{}\tover {} tasks\n",
            avg.method,
            format_cell(avg.mean_f1, avg.accuracy),
            avg.tasks
        ));
    }
    out
}

/// JSON rendering of the same report; metric cells are included as strings
/// so both formats carry identical formatted numbers.
pub fn render_json(report: &ProtocolReport) -> String {
    let mut value = serde_json::to_value(report).expect("report serializes");
    if let Some(entries) = value.get_mut("entries").and_then(|v| v.as_array_mut()) {
        for entry in entries {
            if let Some(results) = entry.get_mut("results").and_then(|v| v.as_array_mut()) {
                for r in results {
                    let f1 = r["mean_f1"].as_f64().expect("mean_f1 is a number");
                    let acc = r["accuracy"].as_f64().expect("accuracy is a number");
                    r["cell"] = serde_json::Value::String(format_cell(f1, acc));
                }
            }
        }
    }
    if let Some(avgs) = value.get_mut("averages").and_then(|v| v.as_array_mut()) {
        for avg in avgs {
            let f1 = avg["mean_f1"].as_f64().expect("mean_f1 is a number");
            let acc = avg["accuracy"].as_f64().expect("accuracy is a number");
            avg["cell"] = serde_json::Value::String(format_cell(f1, acc));
        }
    }
    let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
    text.push('\n');
    text
}
