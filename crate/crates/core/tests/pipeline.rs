//! Whole-pipeline properties across modules.

use mhi_core::classify::{
    evaluate, mlp_train, split_dataset, KnnModel, MlpConfig, SplitSpec, Standardizer,
};
use mhi_core::imgio::{self, GrayFrame, SequenceRecord};
use mhi_core::imgproc::{frame_diff, gaussian_smooth, morph_open};
use mhi_core::moments::{feature_vector, image_invariants, Raster};
use mhi_core::temporal::{build_templates, mhi_step, normalize_mhi};
use mhi_core::{Classifier, LabeledSample, ModelFile, MotionHistory, TrainedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A bright square moving `step` px right per frame over a noisy background.
fn clip(n: usize, offset: (usize, usize), step: usize, seed: u64) -> Vec<GrayFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background: Vec<u8> = (0..60 * 48).map(|_| rng.gen_range(20..30)).collect();
    (0..n)
        .map(|t| {
            let mut f = GrayFrame::new(60, 48, background.clone()).unwrap();
            let x0 = offset.0 + step * t;
            for y in offset.1..offset.1 + 9 {
                for x in x0..x0 + 7 {
                    f.set(x, y, 220);
                }
            }
            f
        })
        .collect()
}

#[test]
fn loaded_sequence_matches_manual_composition() {
    let tmp = tempfile::tempdir().unwrap();
    let frames = clip(12, (2, 10), 3, 1);
    let dir = tmp.path().join("seq");
    imgio::write_sequence(&dir, &frames).unwrap();
    let record = SequenceRecord {
        dir,
        label: Some("slide".into()),
        start: 2,
        end: 11,
    };
    let seq = imgio::load_sequence(&record).unwrap();
    let theta = 25;
    let tau = 6;
    let template = build_templates(&seq, theta, tau).unwrap();

    // By hand: smooth, difference, open, then fold the trailing τ masks.
    let smoothed: Vec<GrayFrame> = frames[2..=11].iter().map(gaussian_smooth).collect();
    let masks: Vec<_> = smoothed
        .windows(2)
        .map(|p| morph_open(&frame_diff(&p[0], &p[1], theta).unwrap()))
        .collect();
    let mut h = MotionHistory::zeros(60, 48, tau).unwrap();
    let mut mei = mhi_core::BinaryMask::zeros(60, 48);
    for m in &masks[masks.len() - tau as usize..] {
        h = mhi_step(&h, m).unwrap();
        mei.union_with(m).unwrap();
    }
    assert_eq!(template.mhi, h);
    assert_eq!(template.mei, mei);
    assert_eq!(template.frame_span, (5, 11));

    let mut expected = [0.0; 16];
    expected[..8].copy_from_slice(&image_invariants(&Raster::from(&h)).unwrap());
    expected[8..].copy_from_slice(&image_invariants(&Raster::from(&mei)).unwrap());
    let expected = expected.map(mhi_core::moments::condition);
    assert_eq!(feature_vector(&template).unwrap().0, expected);
}

#[test]
fn features_do_not_depend_on_clip_position() {
    let features = |offset| {
        let frames = clip(10, offset, 2, 7);
        let record = SequenceRecord {
            dir: "unused".into(),
            label: None,
            start: 0,
            end: 9,
        };
        let seq = imgio::FrameSequence { frames, record };
        feature_vector(&build_templates(&seq, 25, 9).unwrap()).unwrap()
    };
    let a = features((3, 4));
    let b = features((20, 30));
    for (x, y) in a.0.iter().zip(&b.0) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn rendered_mhi_brightest_where_motion_is_newest() {
    let frames = clip(8, (4, 4), 3, 3);
    let record = SequenceRecord {
        dir: "unused".into(),
        label: None,
        start: 0,
        end: 7,
    };
    let seq = imgio::FrameSequence { frames, record };
    let t = build_templates(&seq, 25, 7).unwrap();
    let img = normalize_mhi(&t.mhi);
    // The square's last position spans x = 25..32; its leading edge moved in
    // during the final step.
    assert_eq!(img.get(30, 8), 255);
    assert!(img.get(8, 8) < img.get(20, 8));
}

fn blobs(n_per_class: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [("circle", 0.0), ("square", 4.0), ("wave", -4.0)];
    let mut out = Vec::new();
    for (label, c) in centers {
        for i in 0..n_per_class {
            let features = (0..16)
                .map(|d| c * if d % 2 == 0 { 1.0 } else { -0.5 } + rng.gen_range(-1.0..1.0))
                .collect();
            out.push(LabeledSample {
                features,
                label: label.into(),
                source: format!("{label}:{i}"),
            });
        }
    }
    out
}

#[test]
fn trained_models_survive_serialization() {
    let samples = blobs(12, 11);
    let parts = split_dataset(&samples, &SplitSpec::with_seed(3)).unwrap();
    let standardizer = Standardizer::fit(&parts.train).unwrap();
    let train = standardizer.apply_all(&parts.train);
    let val = standardizer.apply_all(&parts.val);

    let cfg = MlpConfig {
        epochs: 60,
        ..MlpConfig::default()
    };
    let models = [
        TrainedModel::Knn(KnnModel::fit(5, &train).unwrap()),
        TrainedModel::Mlp(mlp_train(&train, &val, &cfg).unwrap().model),
    ];
    for model in models {
        let file = ModelFile {
            tau: 30,
            theta: 10,
            standardizer: standardizer.clone(),
            model,
        };
        let json = file.to_json().unwrap();
        let back = ModelFile::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        for s in &samples {
            assert_eq!(back.predict(&s.features), file.predict(&s.features));
        }
        let e = evaluate(&back, &parts.test).unwrap();
        assert!(
            e.accuracy >= 0.9,
            "{} test accuracy {}",
            file.model.kind(),
            e.accuracy
        );
    }
}
