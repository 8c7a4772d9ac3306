use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::split::shuffle;
use super::{label_set, Classifier, ClassifyError, LabeledSample, Prediction};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            lr: 0.01,
            epochs: 200,
            batch: 16,
            seed: 0,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ClassifyError::InvalidConfig(format!("lr = {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(ClassifyError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch == 0 {
            return Err(ClassifyError::InvalidConfig("batch must be >= 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(ClassifyError::InvalidConfig(
                "hidden layer of width 0".into(),
            ));
        }
        Ok(())
    }
}

/// Fully connected network: tanh hidden layers, softmax output.
///
/// `weights[l]` is row-major with shape `sizes[l + 1] × sizes[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    labels: Vec<String>,
}

/// Loss gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    /// Flattened in [`MlpModel::parameter`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }
}

impl MlpModel {
    /// Model with every weight and bias set to zero.
    pub fn zeros(sizes: Vec<usize>, labels: Vec<String>) -> Result<Self, ClassifyError> {
        let weights = sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Self::from_parts(sizes, weights, biases, labels)
    }

    pub fn from_parts(
        sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        labels: Vec<String>,
    ) -> Result<Self, ClassifyError> {
        let bad = |msg: String| Err(ClassifyError::InvalidConfig(msg));
        if sizes.len() < 2 || sizes.contains(&0) {
            return bad(format!("layer sizes {sizes:?}"));
        }
        if *sizes.last().unwrap() != labels.len() {
            return bad(format!(
                "output width {} but {} labels",
                sizes.last().unwrap(),
                labels.len()
            ));
        }
        if weights.len() != sizes.len() - 1 || biases.len() != sizes.len() - 1 {
            return bad("layer count does not match sizes".into());
        }
        for (l, pair) in sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] || biases[l].len() != pair[1] {
                return bad(format!("layer {l} parameter shape"));
            }
        }
        if weights
            .iter()
            .chain(&biases)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return bad("non-finite parameter".into());
        }
        Ok(Self {
            sizes,
            weights,
            biases,
            labels,
        })
    }

    /// Glorot-uniform weights drawn from `rng`, zero biases.
    fn initialized(sizes: Vec<usize>, labels: Vec<String>, rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..=limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Self {
            sizes,
            weights,
            biases,
            labels,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    fn parameter_slot(&mut self, mut index: usize) -> &mut f64 {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if index < w.len() {
                return &mut w[index];
            }
            index -= w.len();
            if index < b.len() {
                return &mut b[index];
            }
            index -= b.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn parameter(&self, index: usize) -> f64 {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b))
            .nth(index)
            .copied()
            .expect("parameter index out of range")
    }

    pub fn set_parameter(&mut self, index: usize, value: f64) {
        *self.parameter_slot(index) = value;
    }

    /// Pre-activations of every layer for one input; the last entry holds
    /// the output logits. Hidden activations are `tanh` of these.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.weights.len();
        let mut pre = Vec::with_capacity(layers);
        let mut input: Vec<f64> = x.to_vec();
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.weights[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    self.biases[l][o] + row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            if l + 1 < layers {
                input = z.iter().map(|v| v.tanh()).collect();
            }
            pre.push(z);
        }
        pre
    }

    /// Class probabilities for one (standardized) input.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let logits = self.forward(x).pop().expect("at least one layer");
        softmax(&logits)
    }

    /// Mean softmax cross-entropy of a batch.
    pub fn batch_loss(&self, xs: &[&[f64]], ys: &[usize]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                let logits = self.forward(x).pop().unwrap();
                log_sum_exp(&logits) - logits[y]
            })
            .sum::<f64>()
            / xs.len() as f64
    }

    /// Mean cross-entropy loss of a batch and its gradient with respect to
    /// every parameter, by back-propagation.
    pub fn batch_gradients(&self, xs: &[&[f64]], ys: &[usize]) -> (f64, Gradients) {
        let layers = self.weights.len();
        let mut grads = Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;

        for (x, &y) in xs.iter().zip(ys) {
            let pre = self.forward(x);
            let logits = &pre[layers - 1];
            loss += log_sum_exp(logits) - logits[y];

            // dL/dz at the output: softmax - onehot.
            let mut delta = softmax(logits);
            delta[y] -= 1.0;
            delta.iter_mut().for_each(|d| *d *= scale);

            for l in (0..layers).rev() {
                let n_in = self.sizes[l];
                let activation: Vec<f64> = if l == 0 {
                    x.to_vec()
                } else {
                    pre[l - 1].iter().map(|v| v.tanh()).collect()
                };
                let gw = &mut grads.weights[l];
                for (o, &d) in delta.iter().enumerate() {
                    grads.biases[l][o] += d;
                    for (g, a) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(&activation) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    delta = (0..n_in)
                        .map(|i| {
                            let back: f64 = delta
                                .iter()
                                .enumerate()
                                .map(|(o, d)| w[o * n_in + i] * d)
                                .sum();
                            back * (1.0 - activation[i] * activation[i])
                        })
                        .collect();
                }
            }
        }
        (loss * scale, grads)
    }

    fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (p, g) in self
            .weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .zip(grads.weights.iter().chain(&grads.biases))
        {
            for (pv, gv) in p.iter_mut().zip(g) {
                *pv -= lr * gv;
            }
        }
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct MlpFit {
    /// Snapshot from the epoch with the best validation accuracy.
    pub model: MlpModel,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

fn accuracy(model: &MlpModel, samples: &[LabeledSample]) -> f64 {
    let correct = samples
        .iter()
        .filter(|s| mlp_predict(model, &s.features).0 == s.label)
        .count();
    correct as f64 / samples.len() as f64
}

/// Mini-batch SGD on softmax cross-entropy.
///
/// Inputs must already be standardized. The returned model is the snapshot
/// with the highest validation accuracy (earliest epoch on ties); with an
/// empty validation set, training accuracy is used instead.
pub fn mlp_train(
    train: &[LabeledSample],
    val: &[LabeledSample],
    cfg: &MlpConfig,
) -> Result<MlpFit, ClassifyError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(ClassifyError::EmptyTraining);
    }
    let labels = label_set(train);
    if labels.len() < 2 {
        return Err(ClassifyError::SingleClass);
    }
    let dim = train[0].features.len();
    super::check_dims(train, dim)?;
    super::check_dims(val, dim)?;

    let mut sizes = vec![dim];
    sizes.extend(&cfg.hidden);
    sizes.push(labels.len());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::initialized(sizes, labels.clone(), &mut rng);
    let targets: Vec<usize> = train
        .iter()
        .map(|s| labels.binary_search(&s.label).unwrap())
        .collect();
    let selection = if val.is_empty() { train } else { val };

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, MlpModel)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        shuffle(&mut order, &mut rng);
        let mut total_loss = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let xs: Vec<&[f64]> = chunk
                .iter()
                .map(|&i| train[i].features.as_slice())
                .collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grads) = model.batch_gradients(&xs, &ys);
            if !loss.is_finite() {
                return Err(ClassifyError::NonFiniteLoss { epoch });
            }
            model.apply_gradients(&grads, cfg.lr);
            total_loss += loss * chunk.len() as f64;
        }
        if model
            .weights
            .iter()
            .chain(&model.biases)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(ClassifyError::NonFiniteLoss { epoch });
        }
        let val_accuracy = accuracy(&model, selection);
        history.push(EpochRecord {
            epoch,
            mean_loss: total_loss / train.len() as f64,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|b| val_accuracy > b.0) {
            best = Some((val_accuracy, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(MlpFit {
        model,
        best_epoch,
        history,
    })
}

/// Most probable label (ties go to the lexicographically smaller label)
/// and the full probability vector in label order.
pub fn mlp_predict(m: &MlpModel, v: &[f64]) -> (String, Vec<f64>) {
    let probs = m.probabilities(v);
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    (m.labels[best].clone(), probs)
}

impl Classifier for MlpModel {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, features: &[f64]) -> Prediction {
        let (label, probs) = mlp_predict(self, features);
        let idx = self.labels.binary_search(&label).unwrap();
        Prediction {
            label,
            score: probs[idx],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn blobs(n_per: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut out = Vec::new();
        for (label, cx) in [("left", -1.5), ("right", 1.5)] {
            for _ in 0..n_per {
                let x = vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)];
                out.push(LabeledSample::new(x, label));
            }
        }
        out
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = MlpModel::zeros(vec![4, 3, 5], labels(5)).unwrap();
        let (label, probs) = mlp_predict(&m, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(label, "c0");
        for p in probs {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_normalized_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = MlpModel::initialized(vec![3, 6, 4], labels(4), &mut rng);
        let inputs: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let before: Vec<String> = inputs.iter().map(|x| mlp_predict(&m, x).0).collect();
        for x in &inputs {
            let s: f64 = m.probabilities(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        m.biases_mut()
            .last_mut()
            .unwrap()
            .iter_mut()
            .for_each(|b| *b += 7.5);
        let after: Vec<String> = inputs.iter().map(|x| mlp_predict(&m, x).0).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn separable_blobs_are_learned() {
        let data = blobs(20, 11);
        let cfg = MlpConfig {
            lr: 0.05,
            epochs: 200,
            seed: 3,
            ..MlpConfig::default()
        };
        let fit = mlp_train(&data, &[], &cfg).unwrap();
        assert!(accuracy(&fit.model, &data) >= 0.95);
        assert_eq!(fit.history.len(), 200);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(10, 2);
        let cfg = MlpConfig {
            epochs: 5,
            seed: 77,
            ..MlpConfig::default()
        };
        let a = mlp_train(&data, &data[..4], &cfg).unwrap();
        let b = mlp_train(&data, &data[..4], &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn single_class_rejected() {
        let data = vec![
            LabeledSample::new(vec![0.0], "a"),
            LabeledSample::new(vec![1.0], "a"),
        ];
        assert!(matches!(
            mlp_train(&data, &[], &MlpConfig::default()),
            Err(ClassifyError::SingleClass)
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let mut data = blobs(10, 4);
        for s in &mut data {
            s.features.iter_mut().for_each(|v| *v *= 1e200);
        }
        let cfg = MlpConfig {
            hidden: vec![],
            lr: 1e200,
            epochs: 3,
            ..MlpConfig::default()
        };
        let r = mlp_train(&data, &[], &cfg);
        assert!(
            matches!(r, Err(ClassifyError::NonFiniteLoss { .. })),
            "{:?}",
            r.map(|f| f.history)
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = MlpModel::initialized(vec![4, 5, 3, 3], labels(3), &mut rng);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let ys = [0, 2, 1, 1, 0];
        let (_, grads) = m.batch_gradients(&xr, &ys);
        let flat = grads.flatten();
        let h = 1e-5;
        for (i, &g) in flat.iter().enumerate() {
            let mut plus = m.clone();
            plus.set_parameter(i, m.parameter(i) + h);
            let mut minus = m.clone();
            minus.set_parameter(i, m.parameter(i) - h);
            let fd = (plus.batch_loss(&xr, &ys) - minus.batch_loss(&xr, &ys)) / (2.0 * h);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: backprop {g} vs fd {fd}");
        }
    }
}
