//! Persisted classifier: one JSON document holding the pipeline parameters
//! (`tau`, `theta`), the label list, the standardizer and either the KNN
//! training set or the MLP weights.
//!
//! Floats are written with 17 significant digits, so loading a saved model
//! reproduces every parameter bit for bit and saving it again yields the
//! same bytes.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{Classifier, ClassifyError, KnnModel, MlpModel, Prediction, Standardizer};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Knn(KnnModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Knn(_) => "knn",
            TrainedModel::Mlp(_) => "mlp",
        }
    }
}

/// A trained classifier together with everything needed to apply it to raw
/// frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub tau: u32,
    pub theta: u8,
    pub standardizer: Standardizer,
    pub model: TrainedModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    version: u32,
    classifier: String,
    tau: u32,
    theta: u8,
    labels: Vec<String>,
    standardizer: Standardizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knn: Option<KnnWire>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mlp: Option<MlpWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnWire {
    k: usize,
    vectors: Vec<Vec<f64>>,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpWire {
    sizes: Vec<usize>,
    /// Per layer, `sizes[l+1]` rows of `sizes[l]` weights.
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

/// Compact JSON with every float written as `{:.16e}`.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

impl ModelFile {
    pub fn labels(&self) -> &[String] {
        match &self.model {
            TrainedModel::Knn(m) => m.labels(),
            TrainedModel::Mlp(m) => m.labels(),
        }
    }

    pub fn to_json(&self) -> Result<String, ModelFileError> {
        let (knn, mlp) = match &self.model {
            TrainedModel::Knn(m) => (
                Some(KnnWire {
                    k: m.k(),
                    vectors: m.vectors().to_vec(),
                    labels: m.targets().to_vec(),
                }),
                None,
            ),
            TrainedModel::Mlp(m) => (
                None,
                Some(MlpWire {
                    sizes: m.sizes().to_vec(),
                    weights: m
                        .weights()
                        .iter()
                        .zip(m.sizes().windows(2))
                        .map(|(w, s)| w.chunks(s[0]).map(<[f64]>::to_vec).collect())
                        .collect(),
                    biases: m.biases().to_vec(),
                }),
            ),
        };
        let wire = Wire {
            version: MODEL_VERSION,
            classifier: self.model.kind().to_string(),
            tau: self.tau,
            theta: self.theta,
            labels: self.labels().to_vec(),
            standardizer: self.standardizer.clone(),
            knn,
            mlp,
        };
        let all_finite = wire
            .standardizer
            .mean
            .iter()
            .chain(&wire.standardizer.std)
            .chain(wire.knn.iter().flat_map(|k| k.vectors.iter().flatten()))
            .chain(
                wire.mlp
                    .iter()
                    .flat_map(|m| m.weights.iter().flatten().flatten()),
            )
            .chain(wire.mlp.iter().flat_map(|m| m.biases.iter().flatten()))
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ModelFileError::Invalid("non-finite parameter".into()));
        }
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
        wire.serialize(&mut ser)?;
        buf.push(b'\n');
        Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let wire: Wire = serde_json::from_str(text)?;
        if wire.version != MODEL_VERSION {
            return Err(ModelFileError::Version(wire.version));
        }
        if wire.tau == 0 {
            return Err(ModelFileError::Invalid("tau must be >= 1".into()));
        }
        let dim = wire.standardizer.mean.len();
        if wire.standardizer.std.len() != dim {
            return Err(ModelFileError::Invalid(
                "standardizer length mismatch".into(),
            ));
        }
        if wire
            .standardizer
            .std
            .iter()
            .any(|&s| s.is_nan() || s <= 0.0)
        {
            return Err(ModelFileError::Invalid(
                "standardizer std must be positive".into(),
            ));
        }
        let model = match (wire.classifier.as_str(), wire.knn, wire.mlp) {
            ("knn", Some(k), None) => {
                TrainedModel::Knn(KnnModel::from_parts(k.k, k.vectors, k.labels)?)
            }
            ("mlp", None, Some(m)) => {
                let weights = m
                    .weights
                    .into_iter()
                    .map(|rows| rows.into_iter().flatten().collect())
                    .collect();
                TrainedModel::Mlp(MlpModel::from_parts(
                    m.sizes,
                    weights,
                    m.biases,
                    wire.labels.clone(),
                )?)
            }
            (kind, _, _) => {
                return Err(ModelFileError::Invalid(format!(
                    "classifier {kind:?} does not match the model sections present"
                )))
            }
        };
        let file = ModelFile {
            tau: wire.tau,
            theta: wire.theta,
            standardizer: wire.standardizer,
            model,
        };
        if file.labels() != wire.labels.as_slice() {
            return Err(ModelFileError::Invalid("label list mismatch".into()));
        }
        let model_dim = match &file.model {
            TrainedModel::Knn(m) => m.dim(),
            TrainedModel::Mlp(m) => m.input_dim(),
        };
        if model_dim != dim {
            return Err(ModelFileError::Invalid(format!(
                "model expects {model_dim} features, standardizer has {dim}"
            )));
        }
        Ok(file)
    }
}

/// Applies the stored standardizer, then the classifier.
impl Classifier for ModelFile {
    fn labels(&self) -> &[String] {
        ModelFile::labels(self)
    }

    fn predict(&self, features: &[f64]) -> Prediction {
        let z = self.standardizer.apply(features);
        match &self.model {
            TrainedModel::Knn(m) => m.predict(&z),
            TrainedModel::Mlp(m) => m.predict(&z),
        }
    }
}
