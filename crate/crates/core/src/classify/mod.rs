//! Relevance classifiers: multinomial naive Bayes (default), L2-regularized
//! logistic regression and a linear SVM, all trained deterministically.

pub mod linear;
mod naive_bayes;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::textfeat::{FeatureMatrix, SparseRow};

pub use naive_bayes::NaiveBayesParams;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ClassifyError {
    #[error("training data contains only one class")]
    SingleClassTraining,
    #[error("training needs as many labels as rows and at least two rows ({rows} rows, {labels} labels)")]
    BadTrainingShape { rows: usize, labels: usize },
    #[error("loss became non-finite at iteration {iteration}; lower the learning rate")]
    NonFiniteLoss { iteration: usize },
    #[error("matrix has {got} columns but the model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid classifier settings: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[default]
    NaiveBayes,
    LogisticRegression,
    LinearSvm,
}

impl ClassifierKind {
    pub fn requires_nonnegative_features(self) -> bool {
        self == ClassifierKind::NaiveBayes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub smoothing_alpha: f64,
    pub l2_lambda: f64,
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub tolerance: f64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::NaiveBayes,
            smoothing_alpha: 1.0,
            l2_lambda: 1e-3,
            max_iterations: 2000,
            learning_rate: 0.5,
            tolerance: 1e-6,
        }
    }
}

impl ClassifierSpec {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ClassifyError::InvalidSpec(format!("{name} must be positive, got {v}")))
            }
        };
        positive("smoothing_alpha", self.smoothing_alpha)?;
        positive("learning_rate", self.learning_rate)?;
        positive("tolerance", self.tolerance)?;
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(ClassifyError::InvalidSpec(format!(
                "l2_lambda must be nonnegative, got {}",
                self.l2_lambda
            )));
        }
        if self.max_iterations == 0 {
            return Err(ClassifyError::InvalidSpec("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    NaiveBayes(NaiveBayesParams),
    Linear { weights: Vec<f64>, bias: f64 },
}

/// A trained classifier. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ClassifierKind,
    pub model_version: u64,
    pub n_train: usize,
    pub n_features: usize,
    pub params: ModelParams,
}

impl Model {
    pub fn with_version(mut self, version: u64) -> Self {
        self.model_version = version;
        self
    }

    /// Relevance score in `[0, 1]` for one row.
    pub fn score_row(&self, row: &SparseRow) -> f64 {
        match &self.params {
            ModelParams::NaiveBayes(nb) => nb.posterior(row),
            ModelParams::Linear { weights, bias } => sigmoid(row.dot(weights) + bias),
        }
    }

    /// Checks dimensions and finiteness of the stored parameters.
    pub fn check(&self) -> Result<(), String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match (&self.params, self.kind) {
            (ModelParams::NaiveBayes(nb), ClassifierKind::NaiveBayes) => {
                if nb.log_likelihood.iter().any(|l| l.len() != self.n_features) {
                    return Err("log_likelihood length differs from n_features".into());
                }
                if !finite(&nb.log_prior) || !nb.log_likelihood.iter().all(|l| finite(l)) {
                    return Err("non-finite naive Bayes parameter".into());
                }
            }
            (ModelParams::Linear { weights, bias }, ClassifierKind::LogisticRegression | ClassifierKind::LinearSvm) => {
                if weights.len() != self.n_features {
                    return Err("weights length differs from n_features".into());
                }
                if !finite(weights) || !bias.is_finite() {
                    return Err("non-finite weight".into());
                }
            }
            _ => return Err("parameter type does not match classifier kind".into()),
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Trains a classifier on the given (possibly duplicated) rows.
pub fn fit(rows: &[&SparseRow], labels: &[Label], n_features: usize, spec: &ClassifierSpec) -> Result<Model, ClassifyError> {
    spec.validate()?;
    if rows.len() != labels.len() || rows.len() < 2 {
        return Err(ClassifyError::BadTrainingShape {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let n_relevant = labels.iter().filter(|l| l.is_relevant()).count();
    if n_relevant == 0 || n_relevant == labels.len() {
        return Err(ClassifyError::SingleClassTraining);
    }
    if let Some(col) = rows.iter().filter_map(|r| r.max_column()).max() {
        if col >= n_features {
            return Err(ClassifyError::DimensionMismatch {
                expected: n_features,
                got: col + 1,
            });
        }
    }
    let params = match spec.kind {
        ClassifierKind::NaiveBayes => {
            ModelParams::NaiveBayes(NaiveBayesParams::fit(rows, labels, n_features, spec.smoothing_alpha))
        }
        ClassifierKind::LogisticRegression | ClassifierKind::LinearSvm => {
            let loss = linear::Loss::for_kind(spec.kind);
            let (weights, bias) = linear::train(loss, rows, labels, n_features, spec)?;
            ModelParams::Linear { weights, bias }
        }
    };
    Ok(Model {
        kind: spec.kind,
        model_version: 0,
        n_train: rows.len(),
        n_features,
        params,
    })
}

/// Scores every row of the matrix.
pub fn predict_relevance(model: &Model, matrix: &FeatureMatrix) -> Result<Vec<f64>, ClassifyError> {
    if matrix.n_cols() != model.n_features {
        return Err(ClassifyError::DimensionMismatch {
            expected: model.n_features,
            got: matrix.n_cols(),
        });
    }
    Ok(matrix.rows().iter().map(|row| model.score_row(row)).collect())
}
