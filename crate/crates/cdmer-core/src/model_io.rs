//! Self-describing JSON envelope for trained models.
//!
//! The transfer model embeds its training feature sets because test-time
//! kernels are computed against the joined source+target basis; a content
//! hash over those sets is stored and re-checked on load so a corrupted or
//! hand-edited artifact cannot silently predict against the wrong basis.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baseline::BaselineModel;
use crate::error::{Error, Result};
use crate::kernels::{BlockedFeatureSet, DomainTag, KernelConfig};
use crate::rstr::RstrModel;

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixData {
    nrows: usize,
    ncols: usize,
    /// Column-major entries.
    data: Vec<f64>,
}

impl MatrixData {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixData {
            nrows: m.nrows(),
            ncols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    fn into_matrix(self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.nrows * self.ncols {
            return Err(Error::ModelMismatch(format!(
                "matrix payload holds {} entries for a {}x{} shape",
                self.data.len(),
                self.nrows,
                self.ncols
            )));
        }
        Ok(DMatrix::from_column_slice(self.nrows, self.ncols, &self.data))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureSetData {
    domain: DomainTag,
    block_dim: usize,
    len: usize,
    sample_ids: Vec<String>,
    /// One column-major d×N payload per block.
    blocks: Vec<Vec<f64>>,
}

impl FeatureSetData {
    fn from_set(set: &BlockedFeatureSet) -> Self {
        FeatureSetData {
            domain: set.domain_tag(),
            block_dim: set.block_dim(),
            len: set.len(),
            sample_ids: set.sample_ids().to_vec(),
            blocks: set.blocks().iter().map(|b| b.as_slice().to_vec()).collect(),
        }
    }

    fn into_set(self) -> Result<BlockedFeatureSet> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for payload in self.blocks {
            if payload.len() != self.block_dim * self.len {
                return Err(Error::ModelMismatch(
                    "feature block payload does not match its declared shape".into(),
                ));
            }
            blocks.push(DMatrix::from_column_slice(self.block_dim, self.len, &payload));
        }
        BlockedFeatureSet::new(blocks, self.domain, self.sample_ids)
    }
}

/// On-disk representation of a trained model.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)] // built once per save/load
pub enum ModelFile {
    Rstr {
        coefficients: MatrixData,
        region_weights: Vec<f64>,
        kernel: KernelConfig,
        class_names: Vec<String>,
        train_source: FeatureSetData,
        train_target: FeatureSetData,
        /// FNV-1a over the two training sets, source then target.
        train_hash: (u64, u64),
        objective_trace: Vec<f64>,
        converged: bool,
        solver_warnings: usize,
    },
    Baseline {
        coefficients: MatrixData,
        ridge: f64,
        class_names: Vec<String>,
    },
}

impl RstrModel {
    pub fn to_model_file(&self) -> ModelFile {
        ModelFile::Rstr {
            coefficients: MatrixData::from_matrix(self.coefficients()),
            region_weights: self.region_weights().iter().copied().collect(),
            kernel: *self.kernel(),
            class_names: self.class_names().to_vec(),
            train_source: FeatureSetData::from_set(self.train_source()),
            train_target: FeatureSetData::from_set(self.train_target()),
            train_hash: (
                self.train_source().content_hash(),
                self.train_target().content_hash(),
            ),
            objective_trace: self.objective_trace().to_vec(),
            converged: self.converged(),
            solver_warnings: self.solver_warnings(),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self> {
        let ModelFile::Rstr {
            coefficients,
            region_weights,
            kernel,
            class_names,
            train_source,
            train_target,
            train_hash,
            objective_trace,
            converged,
            solver_warnings,
        } = file
        else {
            return Err(Error::ModelMismatch(
                "expected a transfer-regression model file".into(),
            ));
        };
        let train_source = train_source.into_set()?;
        let train_target = train_target.into_set()?;
        if (train_source.content_hash(), train_target.content_hash()) != train_hash {
            return Err(Error::ModelMismatch(
                "training-feature hash does not match the stored basis".into(),
            ));
        }
        let p = coefficients.into_matrix()?;
        if p.nrows() != train_source.len() + train_target.len() {
            return Err(Error::ModelMismatch(format!(
                "coefficient rows {} do not match basis size {}",
                p.nrows(),
                train_source.len() + train_target.len()
            )));
        }
        if region_weights.len() != train_source.block_count() {
            return Err(Error::ModelMismatch(format!(
                "{} region weights for {} blocks",
                region_weights.len(),
                train_source.block_count()
            )));
        }
        Ok(RstrModel {
            p,
            w: DVector::from_vec(region_weights),
            kernel,
            train_source,
            train_target,
            class_names,
            objective_trace,
            converged,
            solver_warnings,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_model(path, &self.to_model_file())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_model_file(read_model(path)?)
    }
}

impl BaselineModel {
    pub fn to_model_file(&self) -> ModelFile {
        ModelFile::Baseline {
            coefficients: MatrixData::from_matrix(self.coefficients()),
            ridge: self.ridge(),
            class_names: self.class_names().to_vec(),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self> {
        let ModelFile::Baseline {
            coefficients,
            ridge,
            class_names,
        } = file
        else {
            return Err(Error::ModelMismatch("expected a baseline model file".into()));
        };
        Ok(BaselineModel {
            coefficients: coefficients.into_matrix()?,
            ridge,
            class_names,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_model(path, &self.to_model_file())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_model_file(read_model(path)?)
    }
}

fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    let json = serde_json::to_string_pretty(file)
        .map_err(|e| Error::InvalidParameter(format!("model serialization failed: {e}")))?;
    fs::write(path, json)
        .map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::ModelMismatch(format!("model file does not parse: {e}")))
}
