use std::fmt;

use super::{Classifier, ClassifyError, LabeledSample};

/// Rows are true labels, columns predicted labels, both in `labels` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// `true\predicted,<labels>` header, one row per true label, then
    /// `accuracy,<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("accuracy,{}\n", self.accuracy()));
        out
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .labels
            .iter()
            .map(String::len)
            .chain([10, self.total().to_string().len()])
            .max()
            .unwrap_or(10);
        write!(f, "{:>width$}", "true\\pred")?;
        for l in &self.labels {
            write!(f, " {l:>width$}")?;
        }
        writeln!(f)?;
        for (l, row) in self.labels.iter().zip(&self.counts) {
            write!(f, "{l:>width$}")?;
            for c in row {
                write!(f, " {c:>width$}")?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "accuracy: {:.4} ({}/{})",
            self.accuracy(),
            self.trace(),
            self.total()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
}

/// Confusion matrix and accuracy of `model` on `samples`.
pub fn evaluate<C: Classifier + ?Sized>(
    model: &C,
    samples: &[LabeledSample],
) -> Result<Evaluation, ClassifyError> {
    if samples.is_empty() {
        return Err(ClassifyError::EmptySplit("evaluation"));
    }
    let labels = model.labels();
    let mut matrix = ConfusionMatrix::new(labels.to_vec());
    for s in samples {
        let truth = labels
            .iter()
            .position(|l| *l == s.label)
            .ok_or_else(|| ClassifyError::UnknownLabel(s.label.clone()))?;
        let predicted = model.predict(&s.features).label;
        let col = labels
            .iter()
            .position(|l| *l == predicted)
            .ok_or(ClassifyError::UnknownLabel(predicted))?;
        matrix.counts[truth][col] += 1;
    }
    let accuracy = matrix.accuracy();
    Ok(Evaluation { matrix, accuracy })
}
