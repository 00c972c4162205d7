//! No-adaptation reference: ridge-stabilized linear regression onto one-hot
//! labels, trained on source features only.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::BlockedFeatureSet;
use crate::optimizer::project_simplex;
use crate::rstr::{argmax_lowest, LabelMatrix, PredictedLabels};

/// Linear regression coefficients over the stacked (K·d)-dimensional
/// feature space.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    pub(crate) coefficients: DMatrix<f64>,
    pub(crate) ridge: f64,
    pub(crate) class_names: Vec<String>,
}

impl BaselineModel {
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }
}

/// Fits C = (XXᵀ + ridge·I)⁻¹ X Lᵀ on the stacked source features.
///
/// Target data plays no role anywhere in this estimator; that is the point
/// of the baseline.
pub fn train_baseline(
    source: &BlockedFeatureSet,
    labels: &LabelMatrix,
    ridge: f64,
) -> Result<BaselineModel> {
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge must be positive, got {ridge}"
        )));
    }
    if labels.len() != source.len() {
        return Err(Error::dims(
            "baseline labels",
            format!("{} samples", source.len()),
            format!("{} samples", labels.len()),
        ));
    }
    let x = source.stacked();
    let dim = x.nrows();
    let gram = &x * x.transpose() + DMatrix::identity(dim, dim) * ridge;
    let rhs = &x * labels.onehot().transpose();
    let coefficients = gram
        .cholesky()
        .ok_or_else(|| Error::SolveFailure("ridge system is not positive definite".into()))?
        .solve(&rhs);
    Ok(BaselineModel {
        coefficients,
        ridge,
        class_names: labels.class_names().to_vec(),
    })
}

/// Scores test samples with Cᵀx; hard labels take the argmax (ties toward
/// the lowest class index) and label vectors are the simplex projection of
/// the raw scores, for report uniformity with the transfer model.
pub fn predict_baseline(model: &BaselineModel, test: &BlockedFeatureSet) -> Result<PredictedLabels> {
    let x = test.stacked();
    if x.nrows() != model.coefficients.nrows() {
        return Err(Error::dims(
            "baseline features",
            format!("{} rows", model.coefficients.nrows()),
            format!("{} rows", x.nrows()),
        ));
    }
    let scores = model.coefficients.transpose() * x;
    let c = scores.nrows();
    let mut label_vectors = DMatrix::zeros(c, test.len());
    let mut hard_labels = Vec::with_capacity(test.len());
    for j in 0..test.len() {
        let col = scores.column(j).clone_owned();
        hard_labels.push(argmax_lowest(col.as_slice()));
        label_vectors.set_column(j, &project_simplex(&col));
    }
    Ok(PredictedLabels {
        label_vectors,
        hard_labels,
    })
}
