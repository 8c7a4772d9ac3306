//! Pipeline operations behind the `mhi` subcommands. Each one is a plain
//! function over in-memory values so it can be tested and composed without
//! going through argument parsing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::warn;
use mhi_core::classify::{
    self, evaluate, split_dataset, Evaluation, KnnModel, MlpConfig, SplitSpec, Standardizer,
};
use mhi_core::imgio::{self, SequenceRecord};
use mhi_core::moments::{self, MomentError};
use mhi_core::temporal::{self, TemporalError};
use mhi_core::{Classifier, GrayFrame, LabeledSample, ModelFile, TrainedModel};
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{detect_secondary_blob, BlobDiagnostic};

/// Label reported for windows without motion.
pub const NO_ACTION: &str = "none";

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Maps `f` over `items`, on `jobs` worker threads when `jobs > 1`. Output
/// order always matches input order.
pub fn map_ordered<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker pool")?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

/// A manifest record plus the identifier used for provenance: the
/// directory exactly as written in the manifest, so outputs do not depend
/// on where the data lives.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub id: String,
    pub record: SequenceRecord,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let records = imgio::load_manifest(&text).with_context(|| path.display().to_string())?;
    Ok(records
        .into_iter()
        .map(|mut record| {
            let id = record.dir.display().to_string();
            if record.dir.is_relative() {
                record.dir = base.join(&record.dir);
            }
            ManifestEntry { id, record }
        })
        .collect())
}

#[derive(Debug, Default)]
pub struct ExtractOutput {
    pub samples: Vec<LabeledSample>,
    pub warnings: Vec<String>,
}

/// Full pipeline for one labeled sequence: frames → template → features.
/// `Ok(None)` means the template held no motion.
pub fn sequence_features(
    record: &SequenceRecord,
    theta: u8,
    tau: u32,
) -> Result<Option<(moments::FeatureVector, (u64, u64))>> {
    let seq = imgio::load_sequence(record)?;
    let template = temporal::build_templates(&seq, theta, tau)?;
    match moments::feature_vector(&template) {
        Ok(f) => Ok(Some((f, template.frame_span))),
        Err(MomentError::NoMotion | MomentError::ZeroMass) => Ok(None),
    }
}

/// One sample per labeled manifest entry. Unlabeled entries and windows
/// without motion are skipped with a warning.
pub fn extract(
    entries: &[ManifestEntry],
    theta: u8,
    tau: u32,
    jobs: usize,
) -> Result<ExtractOutput> {
    let results = map_ordered(entries, jobs, |e| -> Result<Option<LabeledSample>> {
        let Some(label) = e.record.label.clone() else {
            return Ok(None);
        };
        let features = sequence_features(&e.record, theta, tau)
            .with_context(|| format!("sequence {}", e.id))?;
        Ok(features.map(|(f, (first, last))| LabeledSample {
            features: f.as_slice().to_vec(),
            label,
            source: format!("{}:{first}-{last}", e.id),
        }))
    })?;
    let mut out = ExtractOutput::default();
    for (e, r) in entries.iter().zip(results) {
        match r? {
            Some(s) => out.samples.push(s),
            None => {
                let msg = if e.record.label.is_none() {
                    format!("{}: unlabeled sequence skipped", e.id)
                } else {
                    format!("{}: no motion in window, skipped", e.id)
                };
                warn!("{msg}");
                out.warnings.push(msg);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierChoice {
    Knn { k: usize },
    Mlp(MlpConfig),
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ModelFile,
    pub train: Evaluation,
    pub val: Evaluation,
    pub test: Evaluation,
    pub report: String,
}

/// Split, fit the standardizer on the training part, train, and evaluate
/// on all three parts.
pub fn train(
    samples: &[LabeledSample],
    choice: &ClassifierChoice,
    split: &SplitSpec,
    theta: u8,
    tau: u32,
) -> Result<TrainOutput> {
    if classify::label_set(samples).len() < 2 {
        return Err(classify::ClassifyError::SingleClass.into());
    }
    let parts = split_dataset(samples, split)?;
    let standardizer = Standardizer::fit(&parts.train)?;
    let train_z = standardizer.apply_all(&parts.train);
    let val_z = standardizer.apply_all(&parts.val);

    let mut notes = Vec::new();
    let model = match choice {
        ClassifierChoice::Knn { k } => {
            let k = if *k > train_z.len() {
                notes.push(format!("k reduced from {k} to {}", train_z.len()));
                train_z.len()
            } else {
                *k
            };
            notes.push(format!("k = {k}"));
            TrainedModel::Knn(KnnModel::fit(k, &train_z)?)
        }
        ClassifierChoice::Mlp(cfg) => {
            let fit = classify::mlp_train(&train_z, &val_z, cfg)?;
            notes.push(format!(
                "hidden = {:?}, lr = {}, epochs = {}, batch = {}, seed = {}",
                cfg.hidden, cfg.lr, cfg.epochs, cfg.batch, cfg.seed
            ));
            let best = fit.history[fit.best_epoch];
            notes.push(format!(
                "best epoch {} (validation accuracy {:.4}, mean loss {:.6})",
                best.epoch + 1,
                best.val_accuracy,
                best.mean_loss
            ));
            TrainedModel::Mlp(fit.model)
        }
    };
    let model = ModelFile {
        tau,
        theta,
        standardizer,
        model,
    };
    let train_eval = evaluate(&model, &parts.train)?;
    let val_eval = evaluate(&model, &parts.val)?;
    let test_eval = evaluate(&model, &parts.test)?;

    let mut report = format!(
        "classifier: {}\nlabels: {}\nsamples: {} train / {} validation / {} test (seed {})\ntau = {}, theta = {}\n",
        model.model.kind(),
        model.labels().join(", "),
        parts.train.len(),
        parts.val.len(),
        parts.test.len(),
        split.seed,
        tau,
        theta
    );
    for n in notes {
        report.push_str(&n);
        report.push('\n');
    }
    for (name, e) in [
        ("train", &train_eval),
        ("validation", &val_eval),
        ("test", &test_eval),
    ] {
        report.push_str(&format!("\n== {name} ==\n{}\n", e.matrix));
    }
    Ok(TrainOutput {
        model,
        train: train_eval,
        val: val_eval,
        test: test_eval,
        report,
    })
}

/// One labeled window of a clip.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowLabel {
    pub start_frame: u64,
    pub end_frame: u64,
    pub label: String,
    pub score: f64,
    pub component_count: usize,
    pub secondary_blob_warning: bool,
}

/// Window start offsets covering `0..n` with the given stride; the final
/// window is aligned to the end of the clip when the stride does not land
/// there exactly.
pub fn window_starts(n: usize, window: usize, stride: usize) -> Vec<usize> {
    assert!(window >= 1 && stride >= 1 && window <= n);
    let mut starts: Vec<usize> = (0..=n - window).step_by(stride).collect();
    if *starts.last().unwrap() != n - window {
        starts.push(n - window);
    }
    starts
}

/// Sliding-window labeling of a frame sequence with the model's θ and τ.
///
/// `window` defaults to τ frames and is clamped to the clip length; `stride`
/// defaults to half the window (at least 1).
pub fn predict(
    model: &ModelFile,
    frames: &[GrayFrame],
    first_index: u64,
    window: Option<usize>,
    stride: Option<usize>,
    jobs: usize,
) -> Result<Vec<WindowLabel>> {
    let n = frames.len();
    if n < 2 {
        bail!("need at least 2 frames, got {n}");
    }
    let window = window.unwrap_or(model.tau as usize);
    if window < 2 {
        return Err(usage(format!("window must be >= 2, got {window}")));
    }
    let window = window.min(n);
    let stride = stride.unwrap_or((window / 2).max(1));
    if stride == 0 {
        return Err(usage("stride must be >= 1"));
    }
    let masks = temporal::motion_masks(frames, model.theta)?;
    let starts = window_starts(n, window, stride);
    let labels = map_ordered(&starts, jobs, |&s| -> Result<WindowLabel, TemporalError> {
        let last = first_index + (s + window - 1) as u64;
        let template = temporal::template_from_masks(&masks[s..s + window - 1], model.tau, last)?;
        let BlobDiagnostic {
            component_count,
            warning,
        } = detect_secondary_blob(&template.mei);
        let (label, score) = match moments::feature_vector(&template) {
            Ok(f) => {
                let p = model.predict(f.as_slice());
                (p.label, p.score)
            }
            Err(_) => (NO_ACTION.to_string(), 0.0),
        };
        Ok(WindowLabel {
            start_frame: first_index + s as u64,
            end_frame: last,
            label,
            score,
            component_count,
            secondary_blob_warning: warning,
        })
    })?;
    let labels = labels.into_iter().collect::<Result<Vec<_>, _>>()?;
    for w in labels.iter().filter(|w| w.secondary_blob_warning) {
        warn!(
            "frames {}-{}: {} motion regions; a secondary blob (e.g. a shadow) may corrupt the template",
            w.start_frame, w.end_frame, w.component_count
        );
    }
    Ok(labels)
}

/// MEI (0/255) and normalized MHI of the trailing τ window.
pub fn render(frames: &[GrayFrame], theta: u8, tau: u32) -> Result<(GrayFrame, GrayFrame)> {
    let masks = temporal::motion_masks(frames, theta)?;
    let t = temporal::template_from_masks(&masks, tau, frames.len() as u64 - 1)?;
    Ok((t.mei.to_frame(), temporal::normalize_mhi(&t.mhi)))
}

/// Loads every frame in a directory of `NNNNNN.pgm` files.
pub fn load_frame_dir(dir: &Path) -> Result<imgio::FrameSequence> {
    let record = imgio::scan_frame_dir(dir).with_context(|| dir.display().to_string())?;
    imgio::load_sequence(&record).with_context(|| dir.display().to_string())
}

/// Labeled samples from a feature CSV, or extracted from a manifest
/// (`.jsonl`/`.json`) with the given θ and τ.
pub fn load_samples(path: &Path, theta: u8, tau: u32, jobs: usize) -> Result<Vec<LabeledSample>> {
    if is_manifest(path) {
        Ok(extract(&read_manifest(path)?, theta, tau, jobs)?.samples)
    } else {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(mhi_core::dataset::read_features_csv(&text)?)
    }
}

pub fn is_manifest(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl" | "json" | "ndjson")
    )
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ModelFile::from_json(&text).with_context(|| path.display().to_string())
}

/// Default location of the training report next to the model file.
pub fn report_path(model_out: &Path) -> PathBuf {
    model_out.with_extension("report.txt")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_tiling() {
        assert_eq!(window_starts(10, 4, 2), vec![0, 2, 4, 6]);
        assert_eq!(window_starts(11, 4, 2), vec![0, 2, 4, 6, 7]);
        assert_eq!(window_starts(5, 5, 2), vec![0]);
        assert_eq!(window_starts(7, 3, 10), vec![0, 4]);
        for n in 2..40 {
            for w in 2..=n {
                for s in 1..8 {
                    let starts = window_starts(n, w, s);
                    assert_eq!(starts[0], 0);
                    assert_eq!(*starts.last().unwrap() + w, n);
                    assert!(starts.windows(2).all(|p| p[0] < p[1] && p[1] - p[0] <= s));
                }
            }
        }
    }

    #[test]
    fn ordered_map_matches_sequential() {
        let items: Vec<u64> = (0..100).collect();
        let seq = map_ordered(&items, 1, |x| x * x).unwrap();
        let par = map_ordered(&items, 4, |x| x * x).unwrap();
        assert_eq!(seq, par);
    }
}
