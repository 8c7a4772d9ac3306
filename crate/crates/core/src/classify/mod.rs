//! Dataset splitting, standardization, classifiers and evaluation.
//!
//! Everything here is deterministic: randomness comes only from a
//! [`ChaCha8Rng`](rand_chacha::ChaCha8Rng) seeded by the caller, so a
//! given `(data, seed, config)` always produces the same split and model.

mod eval;
mod knn;
mod mlp;
mod split;
mod standardize;

pub use eval::{evaluate, ConfusionMatrix, Evaluation};
pub use knn::{knn_predict, KnnModel, KnnPrediction, DEFAULT_K};
pub use mlp::{mlp_predict, mlp_train, EpochRecord, Gradients, MlpConfig, MlpFit, MlpModel};
pub use split::{split_dataset, DatasetSplit, SplitSpec};
pub use standardize::{Standardizer, STD_FLOOR};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("label {label:?} has only {count} sample(s); stratified splitting needs at least 2")]
    Stratification { label: String, count: usize },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid split ratios: {0}")]
    InvalidSplit(String),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite loss at epoch {epoch}; the learning rate is likely too high")]
    NonFiniteLoss { epoch: usize },
    #[error("label {0:?} is not known to the model")]
    UnknownLabel(String),
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidConfig(String),
}

/// Feature vector with its action label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: String,
    /// Sequence id and frame span the features came from.
    pub source: String,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: impl Into<String>) -> Self {
        Self {
            features,
            label: label.into(),
            source: String::new(),
        }
    }
}

/// Outcome of classifying one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    /// Probability (MLP) or vote fraction (KNN) of `label`.
    pub score: f64,
}

/// A trained model that maps feature vectors onto a fixed label list.
pub trait Classifier {
    fn labels(&self) -> &[String];
    fn predict(&self, features: &[f64]) -> Prediction;
}

/// Sorted, de-duplicated labels of `samples`.
pub fn label_set(samples: &[LabeledSample]) -> Vec<String> {
    let mut labels: Vec<String> = samples.iter().map(|s| s.label.clone()).collect();
    labels.sort();
    labels.dedup();
    labels
}

fn check_dims(samples: &[LabeledSample], expected: usize) -> Result<(), ClassifyError> {
    for s in samples {
        if s.features.len() != expected {
            return Err(ClassifyError::DimensionMismatch {
                expected,
                found: s.features.len(),
            });
        }
    }
    Ok(())
}
