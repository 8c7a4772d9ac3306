//! Feature dump CSV: header `label,src,f0,...,f15`, one row per sample.
//!
//! Values are written with 17 significant digits so a dump reloads to the
//! exact same doubles.

use thiserror::Error;

use crate::classify::LabeledSample;
use crate::moments::FEATURE_LEN;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("feature CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature CSV header must be label,src,f0..f{}", FEATURE_LEN - 1)]
    BadHeader,
    #[error("feature CSV row {row}: {message}")]
    BadRow { row: usize, message: String },
}

/// `{:.16e}`: 17 significant digits, round-trip exact for `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header() -> Vec<String> {
    let mut h = vec!["label".to_string(), "src".to_string()];
    h.extend((0..FEATURE_LEN).map(|i| format!("f{i}")));
    h
}

pub fn write_features_csv(samples: &[LabeledSample]) -> Result<String, DatasetError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header())?;
    for s in samples {
        let mut row = vec![s.label.clone(), s.source.clone()];
        row.extend(s.features.iter().map(|&v| format_f64(v)));
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| DatasetError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn read_features_csv(text: &str) -> Result<Vec<LabeledSample>, DatasetError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    if r.headers()?.iter().ne(header().iter().map(String::as_str)) {
        return Err(DatasetError::BadHeader);
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let features = rec
            .iter()
            .skip(2)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::BadRow {
                        row,
                        message: format!("bad feature value {f:?}"),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if features.len() != FEATURE_LEN {
            return Err(DatasetError::BadRow {
                row,
                message: format!("expected {FEATURE_LEN} features, found {}", features.len()),
            });
        }
        out.push(LabeledSample {
            features,
            label: rec[0].to_string(),
            source: rec[1].to_string(),
        });
    }
    Ok(out)
}
