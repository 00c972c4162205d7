//! The `cdmer-features v1` text format.
//!
//! One header line, then one sample per line:
//!
//! ```text
//! #cdmer-features v1 K=<blocks> d=<dim> N=<samples> classes=<name,name,...>
//! [<class-name>] v_1 ... v_{K*d}
//! ```
//!
//! Values are block-major (all of block 1, then block 2, ...) and written
//! with Rust's shortest round-tripping float formatting, so save → load is
//! bit-exact. The class list may be empty for unlabeled sets; when labels
//! are present every row must carry one.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::kernels::{BlockedFeatureSet, DomainTag};
use crate::rstr::LabelMatrix;

use super::protocol::DatasetManifest;

pub const FORMAT_HEADER: &str = "#cdmer-features v1";

/// Errors raised while reading or validating feature files. Row numbers are
/// 1-based over data rows (the header is row 0).
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("row {row}: expected {expected} values (plus an optional label token), got {actual} tokens")]
    RowLength {
        row: usize,
        expected: usize,
        actual: usize,
    },

    #[error("row {row}: unknown class name {name:?}")]
    UnknownClass { row: usize, name: String },

    #[error("row {row}: cannot parse {token:?} as a number")]
    BadValue { row: usize, token: String },

    #[error("row {row}: non-finite value {token:?}")]
    NonFinite { row: usize, token: String },

    #[error("row {row}: file mixes labeled and unlabeled rows")]
    MixedLabeling { row: usize },

    #[error("expected {expected} data rows, found {actual}")]
    RowCount { expected: usize, actual: usize },

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("manifest mismatch on {field}: manifest says {expected}, file has {actual}")]
    ManifestMismatch {
        field: &'static str,
        expected: String,
        actual: String,
    },
}

fn header_field<'a>(token: Option<&'a str>, key: &str) -> Result<&'a str, DataError> {
    let token =
        token.ok_or_else(|| DataError::MalformedHeader(format!("missing {key}= field")))?;
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| DataError::MalformedHeader(format!("expected {key}=<value>, got {token:?}")))
}

fn parse_count(value: &str, key: &str) -> Result<usize, DataError> {
    value
        .parse::<usize>()
        .map_err(|_| DataError::MalformedHeader(format!("{key}={value:?} is not a count")))
}

/// Parses the text format from a string.
pub fn parse_features(
    text: &str,
) -> Result<(BlockedFeatureSet, Option<LabelMatrix>), DataError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| DataError::MalformedHeader("empty file".into()))?;
    let mut tokens = header.split_whitespace();
    match (tokens.next(), tokens.next()) {
        (Some("#cdmer-features"), Some("v1")) => {}
        _ => {
            return Err(DataError::MalformedHeader(format!(
                "expected {FORMAT_HEADER:?} prefix"
            )))
        }
    }
    let k = parse_count(header_field(tokens.next(), "K")?, "K")?;
    let d = parse_count(header_field(tokens.next(), "d")?, "d")?;
    let n = parse_count(header_field(tokens.next(), "N")?, "N")?;
    let class_field = header_field(tokens.next(), "classes")?;
    if let Some(extra) = tokens.next() {
        return Err(DataError::MalformedHeader(format!(
            "unexpected trailing token {extra:?}"
        )));
    }
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }
    if k == 0 || d == 0 {
        return Err(DataError::MalformedHeader(format!(
            "K and d must be at least 1, got K={k} d={d}"
        )));
    }
    let class_names: Vec<String> = if class_field.is_empty() {
        Vec::new()
    } else {
        class_field.split(',').map(str::to_owned).collect()
    };
    if class_names.iter().any(|name| name.is_empty()) {
        return Err(DataError::MalformedHeader("empty class name".into()));
    }

    let values_per_row = k * d;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut hard_labels: Vec<usize> = Vec::new();
    let mut labeled: Option<bool> = None;

    for (idx, line) in lines.enumerate() {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if columns.len() == n {
            return Err(DataError::RowCount {
                expected: n,
                actual: columns.len() + 1,
            });
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let has_label = match tokens.len() {
            len if len == values_per_row => false,
            len if len == values_per_row + 1 => true,
            len => {
                return Err(DataError::RowLength {
                    row,
                    expected: values_per_row,
                    actual: len,
                })
            }
        };
        match labeled {
            None => labeled = Some(has_label),
            Some(expect) if expect != has_label => {
                return Err(DataError::MixedLabeling { row })
            }
            _ => {}
        }
        let mut tokens = tokens.into_iter();
        if has_label {
            let name = tokens.next().expect("label token present");
            let class = class_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| DataError::UnknownClass {
                    row,
                    name: name.to_owned(),
                })?;
            hard_labels.push(class);
        }
        let mut values = Vec::with_capacity(values_per_row);
        for token in tokens {
            let v: f64 = token.parse().map_err(|_| DataError::BadValue {
                row,
                token: token.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    token: token.to_owned(),
                });
            }
            values.push(v);
        }
        columns.push(values);
    }

    if columns.len() != n {
        return Err(DataError::RowCount {
            expected: n,
            actual: columns.len(),
        });
    }

    let mut blocks = Vec::with_capacity(k);
    for b in 0..k {
        blocks.push(DMatrix::from_fn(d, n, |r, c| columns[c][b * d + r]));
    }
    let ids = (1..=n).map(|i| format!("row{i}")).collect();
    let set = BlockedFeatureSet::new(blocks, DomainTag::Source, ids)
        .map_err(|e| DataError::InvalidLabels(e.to_string()))?;

    let labels = if labeled == Some(true) {
        Some(
            LabelMatrix::from_hard_labels(&hard_labels, class_names)
                .map_err(|e| DataError::InvalidLabels(e.to_string()))?,
        )
    } else {
        None
    };
    Ok((set, labels))
}

/// Renders a feature set (and optional labels) in the text format.
pub fn render_features(set: &BlockedFeatureSet, labels: Option<&LabelMatrix>) -> String {
    let (k, d, n) = (set.block_count(), set.block_dim(), set.len());
    let class_list = labels
        .map(|l| l.class_names().join(","))
        .unwrap_or_default();
    let mut out = format!("{FORMAT_HEADER} K={k} d={d} N={n} classes={class_list}\n");
    let hard = labels.map(|l| l.hard_labels());
    for j in 0..n {
        let mut row = String::new();
        if let (Some(hard), Some(labels)) = (&hard, labels) {
            row.push_str(&labels.class_names()[hard[j]]);
        }
        for b in 0..k {
            for r in 0..d {
                if !row.is_empty() {
                    row.push(' ');
                }
                row.push_str(&format!("{}", set.block(b)[(r, j)]));
            }
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn save_features(
    path: &Path,
    set: &BlockedFeatureSet,
    labels: Option<&LabelMatrix>,
) -> Result<(), DataError> {
    fs::write(path, render_features(set, labels)).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_features_from_path(
    path: &Path,
) -> Result<(BlockedFeatureSet, Option<LabelMatrix>), DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_features(&text)
}

/// Loads the manifest's feature file and cross-checks the declared layout.
pub fn load_features(
    manifest: &DatasetManifest,
) -> Result<(BlockedFeatureSet, Option<LabelMatrix>), DataError> {
    let (set, labels) = load_features_from_path(&manifest.feature_file)?;
    let checks: [(&'static str, usize, usize); 3] = [
        ("K", manifest.k, set.block_count()),
        ("d", manifest.d, set.block_dim()),
        ("N", manifest.n, set.len()),
    ];
    for (field, expected, actual) in checks {
        if expected != actual {
            return Err(DataError::ManifestMismatch {
                field,
                expected: expected.to_string(),
                actual: actual.to_string(),
            });
        }
    }
    if !manifest.class_counts.is_empty() {
        if let Some(labels) = &labels {
            for cc in &manifest.class_counts {
                let actual = labels
                    .hard_labels()
                    .iter()
                    .zip(std::iter::repeat(()))
                    .filter(|(&l, _)| labels.class_names()[l] == cc.name)
                    .count();
                if actual != cc.count {
                    return Err(DataError::ManifestMismatch {
                        field: "class_counts",
                        expected: format!("{} x {}", cc.count, cc.name),
                        actual: format!("{actual} x {}", cc.name),
                    });
                }
            }
        }
    }
    Ok((set, labels))
}
