use serde::{Deserialize, Serialize};

use super::{ClassifyError, LabeledSample};

/// Smallest standard deviation kept; constant features divide by this.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-feature z-scoring fit on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of every coordinate.
    pub fn fit(train: &[LabeledSample]) -> Result<Self, ClassifyError> {
        Self::fit_rows(train.iter().map(|s| s.features.as_slice()))
    }

    pub fn fit_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self, ClassifyError> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let first = rows.first().ok_or(ClassifyError::EmptyTraining)?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            if r.len() != dim {
                return Err(ClassifyError::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((acc, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    /// Standardized copies of `samples`.
    pub fn apply_all(&self, samples: &[LabeledSample]) -> Vec<LabeledSample> {
        samples
            .iter()
            .map(|s| LabeledSample {
                features: self.apply(&s.features),
                ..s.clone()
            })
            .collect()
    }
}
