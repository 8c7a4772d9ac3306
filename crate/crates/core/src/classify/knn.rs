use super::{Classifier, ClassifyError, LabeledSample, Prediction};

pub const DEFAULT_K: usize = 5;

/// Stored (already standardized) training vectors with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    vectors: Vec<Vec<f64>>,
    targets: Vec<String>,
    labels: Vec<String>,
}

impl KnnModel {
    pub fn fit(k: usize, train: &[LabeledSample]) -> Result<Self, ClassifyError> {
        Self::from_parts(
            k,
            train.iter().map(|s| s.features.clone()).collect(),
            train.iter().map(|s| s.label.clone()).collect(),
        )
    }

    pub fn from_parts(
        k: usize,
        vectors: Vec<Vec<f64>>,
        targets: Vec<String>,
    ) -> Result<Self, ClassifyError> {
        if vectors.is_empty() {
            return Err(ClassifyError::EmptyTraining);
        }
        if vectors.len() != targets.len() {
            return Err(ClassifyError::InvalidConfig(format!(
                "{} vectors but {} labels",
                vectors.len(),
                targets.len()
            )));
        }
        if k == 0 || k > vectors.len() {
            return Err(ClassifyError::InvalidConfig(format!(
                "k = {k} with {} stored samples",
                vectors.len()
            )));
        }
        let dim = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(ClassifyError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        let mut labels = targets.clone();
        labels.sort();
        labels.dedup();
        Ok(Self {
            k,
            vectors,
            targets,
            labels,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Label of each stored vector.
    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnPrediction {
    pub label: String,
    /// Vote count per label among the k neighbors, in label order; labels
    /// with no votes are omitted.
    pub votes: Vec<(String, usize)>,
    /// Indices of the k nearest stored samples, nearest first.
    pub neighbors: Vec<usize>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority vote of the k nearest stored samples (Euclidean).
///
/// Equal distances rank the lower stored index first. Equal vote counts go
/// to the label whose neighbors have the smaller mean distance, then to the
/// lexicographically smaller label.
pub fn knn_predict(m: &KnnModel, v: &[f64]) -> KnnPrediction {
    let mut ranked: Vec<(f64, usize)> = m
        .vectors
        .iter()
        .enumerate()
        .map(|(i, s)| (squared_distance(s, v), i))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if m.k < ranked.len() {
        ranked.select_nth_unstable_by(m.k - 1, by_distance);
        ranked.truncate(m.k);
    }
    ranked.sort_unstable_by(by_distance);

    // (label index, votes, summed distance)
    let mut tally: Vec<(usize, usize, f64)> = Vec::new();
    for &(d2, i) in &ranked {
        let li = m
            .labels
            .binary_search(&m.targets[i])
            .expect("label set covers targets");
        match tally.iter_mut().find(|t| t.0 == li) {
            Some(t) => {
                t.1 += 1;
                t.2 += d2.sqrt();
            }
            None => tally.push((li, 1, d2.sqrt())),
        }
    }
    let winner = tally
        .iter()
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| (a.2 / a.1 as f64).total_cmp(&(b.2 / b.1 as f64)))
                .then(a.0.cmp(&b.0))
        })
        .map(|t| t.0)
        .expect("k >= 1");
    tally.sort_by_key(|t| t.0);

    KnnPrediction {
        label: m.labels[winner].clone(),
        votes: tally.iter().map(|t| (m.labels[t.0].clone(), t.1)).collect(),
        neighbors: ranked.iter().map(|r| r.1).collect(),
    }
}

impl Classifier for KnnModel {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, features: &[f64]) -> Prediction {
        let p = knn_predict(self, features);
        let votes = p
            .votes
            .iter()
            .find(|(l, _)| *l == p.label)
            .map_or(0, |(_, n)| *n);
        Prediction {
            score: votes as f64 / self.k as f64,
            label: p.label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: usize, pts: &[(&[f64], &str)]) -> KnnModel {
        KnnModel::from_parts(
            k,
            pts.iter().map(|p| p.0.to_vec()).collect(),
            pts.iter().map(|p| p.1.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn nearest_wins_with_k1() {
        let m = model(1, &[(&[0.0, 0.0], "A"), (&[10.0, 10.0], "B")]);
        assert_eq!(knn_predict(&m, &[0.5, -0.2]).label, "A");
        assert_eq!(knn_predict(&m, &[9.0, 9.5]).label, "B");
    }

    #[test]
    fn k_equal_to_all_is_global_majority() {
        let m = model(
            5,
            &[
                (&[0.0], "B"),
                (&[1.0], "A"),
                (&[2.0], "A"),
                (&[3.0], "B"),
                (&[4.0], "A"),
            ],
        );
        for q in [-100.0, 0.0, 2.5, 100.0] {
            assert_eq!(knn_predict(&m, &[q]).label, "A");
        }
        assert_eq!(m.predict(&[0.0]).score, 0.6);
    }

    #[test]
    fn distance_tie_prefers_lower_index() {
        // Two stored points equidistant from the query.
        let m = model(1, &[(&[-1.0], "Z"), (&[1.0], "A")]);
        let p = knn_predict(&m, &[0.0]);
        assert_eq!(p.label, "Z");
        assert_eq!(p.neighbors, vec![0]);
    }

    #[test]
    fn vote_tie_prefers_closer_then_lexicographic() {
        let m = model(2, &[(&[1.0], "B"), (&[-2.0], "A")]);
        assert_eq!(knn_predict(&m, &[0.0]).label, "B");
        let m = model(2, &[(&[1.0], "B"), (&[-1.0], "A")]);
        assert_eq!(knn_predict(&m, &[0.0]).label, "A");
    }

    #[test]
    fn invalid_k() {
        let pts = vec![vec![0.0], vec![1.0]];
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(KnnModel::from_parts(0, pts.clone(), labels.clone()).is_err());
        assert!(KnnModel::from_parts(3, pts, labels).is_err());
    }
}
