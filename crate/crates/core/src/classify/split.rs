use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClassifyError, LabeledSample};

/// Train/validation/test proportions and the shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.50,
            val: 0.25,
            test: 0.25,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let ratios = [self.train, self.val, self.test];
        if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(ClassifyError::InvalidSplit(format!("{ratios:?}")));
        }
        if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ClassifyError::InvalidSplit(format!(
                "{ratios:?} does not sum to 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledSample>,
    pub val: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

// Guards against products such as 0.29 * 100 landing just below an integer.
const CUT_SLACK: f64 = 1e-9;

/// Stratified split. Labels are visited in sorted order; each label's
/// samples (in input order) are shuffled with one shared seeded PRNG, then
/// cut into `floor(n·train)`, `floor(n·val)` and the remainder.
pub fn split_dataset(
    samples: &[LabeledSample],
    spec: &SplitSpec,
) -> Result<DatasetSplit, ClassifyError> {
    spec.validate()?;
    if samples.len() < 4 {
        return Err(ClassifyError::TooFewSamples {
            needed: 4,
            found: samples.len(),
        });
    }
    let mut groups: BTreeMap<&str, Vec<&LabeledSample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.label.as_str()).or_default().push(s);
    }
    if let Some((label, group)) = groups.iter().find(|(_, g)| g.len() < 2) {
        return Err(ClassifyError::Stratification {
            label: label.to_string(),
            count: group.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = DatasetSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for group in groups.values_mut() {
        shuffle(group, &mut rng);
        let n = group.len() as f64;
        let n_train = ((n * spec.train + CUT_SLACK).floor() as usize).min(group.len());
        let n_val = ((n * spec.val + CUT_SLACK).floor() as usize).min(group.len() - n_train);
        let (train, rest) = group.split_at(n_train);
        let (val, test) = rest.split_at(n_val);
        out.train.extend(train.iter().map(|s| (*s).clone()));
        out.val.extend(val.iter().map(|s| (*s).clone()));
        out.test.extend(test.iter().map(|s| (*s).clone()));
    }

    for (name, part) in [
        ("train", &out.train),
        ("validation", &out.val),
        ("test", &out.test),
    ] {
        if part.is_empty() {
            return Err(ClassifyError::EmptySplit(name));
        }
    }
    Ok(out)
}

/// Fisher–Yates, drawing indices from `rng`.
pub(crate) fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
