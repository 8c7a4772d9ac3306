//! Grayscale frame I/O.
//!
//! Frames are stored as binary PGM (`P5`, maxval ≤ 255). A sequence is a
//! directory of zero-padded six digit frame files (`000000.pgm`, ...) and
//! a manifest is a JSON Lines file describing which frame range of which
//! directory forms a (possibly labeled) sequence.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid frame: {width}x{height} with {len} data bytes")]
pub struct InvalidFrame {
    pub width: usize,
    pub height: usize,
    pub len: usize,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, InvalidFrame> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(InvalidFrame {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A frame filled with a single intensity.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be nonzero");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn same_dims(&self, other: &GrayFrame) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PGM data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("unsupported PGM maxval {0} (only 8-bit is supported)")]
    UnsupportedMaxval(u32),
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, field: &str) -> Result<u32, PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::MalformedHeader(format!("missing {field}")));
        }
        // Digits only, so this is valid UTF-8.
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| PgmError::MalformedHeader(format!("{field} out of range")))
    }
}

/// Decodes a binary PGM image.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayFrame, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::MalformedHeader("expected magic \"P5\"".into()));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    match bytes.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        _ => {
            return Err(PgmError::MalformedHeader(
                "expected whitespace after magic".into(),
            ))
        }
    }
    let width = cur.read_uint("width")? as usize;
    let height = cur.read_uint("height")? as usize;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval == 0 {
        return Err(PgmError::MalformedHeader("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(PgmError::MalformedHeader(
                "missing separator after maxval".into(),
            ))
        }
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::MalformedHeader("dimensions overflow".into()))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(PgmError::TruncatedData {
            expected,
            found: raster.len(),
        });
    }
    Ok(GrayFrame {
        width,
        height,
        data: raster[..expected].to_vec(),
    })
}

/// Encodes a frame with the canonical header `P5\n{w} {h}\n255\n`.
pub fn write_pgm(frame: &GrayFrame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width, frame.height);
    let mut out = Vec::with_capacity(header.len() + frame.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&frame.data);
    out
}

/// One manifest line: a frame range inside a directory, optionally labeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceRecord {
    pub dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub start: u64,
    pub end: u64,
}

impl SequenceRecord {
    pub fn frame_count(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn frame_path(&self, index: u64) -> PathBuf {
        self.dir.join(frame_file_name(index))
    }

    /// Human-readable identifier used as sample provenance.
    pub fn id(&self) -> String {
        self.dir.display().to_string()
    }
}

pub fn frame_file_name(index: u64) -> String {
    format!("{index:06}.pgm")
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("manifest line {line}: end {end} < start {start}")]
    Range { line: usize, start: u64, end: u64 },
    #[error("reading manifest {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl ManifestError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ManifestError::Parse { line, .. } | ManifestError::Range { line, .. } => Some(*line),
            ManifestError::Io { .. } => None,
        }
    }
}

/// Parses JSON Lines manifest text. Blank lines are ignored; line numbers
/// in errors are 1-based.
pub fn load_manifest(text: &str) -> Result<Vec<SequenceRecord>, ManifestError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SequenceRecord = serde_json::from_str(line).map_err(|e| ManifestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.end < rec.start {
            return Err(ManifestError::Range {
                line: line_no,
                start: rec.start,
                end: rec.end,
            });
        }
        records.push(rec);
    }
    Ok(records)
}

/// Reads a manifest file; relative `dir` entries are resolved against the
/// manifest's own directory.
pub fn load_manifest_file(path: &Path) -> Result<Vec<SequenceRecord>, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut records = load_manifest(&text)?;
    for rec in &mut records {
        if rec.dir.is_relative() {
            rec.dir = base.join(&rec.dir);
        }
    }
    Ok(records)
}

/// Serializes records as JSON Lines.
pub fn write_manifest(records: &[SequenceRecord]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("missing frame {index} ({path})")]
    MissingFrame { index: u64, path: PathBuf },
    #[error("frame {index} is {found:?}, expected {expected:?}")]
    DimensionMismatch {
        index: u64,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("frame {index}: {source}")]
    Pgm { index: u64, source: PgmError },
    #[error("frame {index}: {source}")]
    Io { index: u64, source: io::Error },
    #[error("no frames found in {0}")]
    EmptyDirectory(PathBuf),
}

/// Ordered frames of one record, all with identical dimensions.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub frames: Vec<GrayFrame>,
    pub record: SequenceRecord,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn read_frame(path: &Path, index: u64) -> Result<GrayFrame, SequenceError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(SequenceError::MissingFrame {
                index,
                path: path.to_path_buf(),
            })
        }
        Err(source) => return Err(SequenceError::Io { index, source }),
    };
    read_pgm(&bytes).map_err(|source| SequenceError::Pgm { index, source })
}

/// Loads every frame of `record` in index order.
pub fn load_sequence(record: &SequenceRecord) -> Result<FrameSequence, SequenceError> {
    let mut frames: Vec<GrayFrame> = Vec::with_capacity(record.frame_count());
    for index in record.start..=record.end {
        let frame = read_frame(&record.frame_path(index), index)?;
        if let Some(first) = frames.first() {
            if !first.same_dims(&frame) {
                return Err(SequenceError::DimensionMismatch {
                    index,
                    expected: (first.width, first.height),
                    found: (frame.width, frame.height),
                });
            }
        }
        frames.push(frame);
    }
    Ok(FrameSequence {
        frames,
        record: record.clone(),
    })
}

/// Builds an unlabeled record spanning the frame files present in `dir`,
/// from the lowest to the highest index found. Gaps surface later as
/// `MissingFrame` from [`load_sequence`].
pub fn scan_frame_dir(dir: &Path) -> Result<SequenceRecord, SequenceError> {
    let entries = fs::read_dir(dir).map_err(|source| SequenceError::Io { index: 0, source })?;
    let mut lo = u64::MAX;
    let mut hi = 0u64;
    for entry in entries {
        let entry = entry.map_err(|source| SequenceError::Io { index: 0, source })?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_suffix(".pgm") else {
            continue;
        };
        if stem.len() != 6 || !stem.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let idx: u64 = stem.parse().unwrap();
        lo = lo.min(idx);
        hi = hi.max(idx);
    }
    if lo == u64::MAX {
        return Err(SequenceError::EmptyDirectory(dir.to_path_buf()));
    }
    Ok(SequenceRecord {
        dir: dir.to_path_buf(),
        label: None,
        start: lo,
        end: hi,
    })
}

/// Writes `frames` into `dir` as `000000.pgm`, `000001.pgm`, ...
pub fn write_sequence(dir: &Path, frames: &[GrayFrame]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        fs::write(dir.join(frame_file_name(i as u64)), write_pgm(f))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pgm(header: &str, data: &[u8]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        v.extend_from_slice(data);
        v
    }

    #[test]
    fn minimal_file() {
        let f = read_pgm(&pgm("P5\n2 1\n255\n", &[0, 255])).unwrap();
        assert_eq!(f, GrayFrame::new(2, 1, vec![0, 255]).unwrap());
    }

    #[test]
    fn header_comment_skipped() {
        let f = read_pgm(&pgm("P5\n# c\n1 1\n255\n", &[7])).unwrap();
        assert_eq!(f, GrayFrame::new(1, 1, vec![7]).unwrap());
    }

    #[test]
    fn truncated() {
        let err = read_pgm(&pgm("P5\n2 2\n255\n", &[1, 2, 3])).unwrap_err();
        assert_eq!(
            err,
            PgmError::TruncatedData {
                expected: 4,
                found: 3
            }
        );
    }

    #[test]
    fn bad_headers() {
        assert!(matches!(
            read_pgm(b"P2\n1 1\n255\n\0"),
            Err(PgmError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_pgm(b"P5\n1\n"),
            Err(PgmError::MalformedHeader(_))
        ));
        assert!(matches!(
            read_pgm(b"P5\n0 1\n255\n"),
            Err(PgmError::MalformedHeader(_))
        ));
        assert_eq!(
            read_pgm(b"P5\n1 1\n65535\n\0\0"),
            Err(PgmError::UnsupportedMaxval(65535))
        );
    }

    #[test]
    fn canonical_encoding() {
        let f = GrayFrame::new(1, 1, vec![0]).unwrap();
        assert_eq!(write_pgm(&f), b"P5\n1 1\n255\n\0".to_vec());
        let f = GrayFrame::new(2, 1, vec![0, 255]).unwrap();
        let bytes = write_pgm(&f);
        assert_eq!(bytes.len(), 11 + 2);
        assert_eq!(&bytes[..11], b"P5\n2 1\n255\n");
    }

    proptest! {
        #[test]
        fn pgm_round_trip(
            (w, h, data) in (1usize..12, 1usize..12)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<u8>(), w * h)))
        ) {
            let f = GrayFrame::new(w, h, data).unwrap();
            prop_assert_eq!(read_pgm(&write_pgm(&f)).unwrap(), f);
        }
    }

    #[test]
    fn manifest_parsing() {
        let recs = load_manifest(r#"{"dir":"a","label":"walking","start":0,"end":9}"#).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].label.as_deref(), Some("walking"));
        assert_eq!(recs[0].frame_count(), 10);

        assert!(load_manifest("").unwrap().is_empty());
        assert!(load_manifest("\n  \n").unwrap().is_empty());

        let err = load_manifest(r#"{"dir":"a","start":5,"end":2}"#).unwrap_err();
        assert!(matches!(err, ManifestError::Range { line: 1, .. }));

        let err = load_manifest("{\"dir\":\"a\",\"start\":0,\"end\":1}\n\nnot json").unwrap_err();
        assert_eq!(err.line(), Some(3));
    }

    #[test]
    fn manifest_order_preserved() {
        let recs = vec![
            SequenceRecord {
                dir: "b".into(),
                label: Some("x".into()),
                start: 0,
                end: 3,
            },
            SequenceRecord {
                dir: "a".into(),
                label: None,
                start: 2,
                end: 2,
            },
        ];
        assert_eq!(load_manifest(&write_manifest(&recs)).unwrap(), recs);
    }

    fn write_frames(dir: &Path, dims: &[(usize, usize)]) {
        for (i, &(w, h)) in dims.iter().enumerate() {
            fs::write(
                dir.join(frame_file_name(i as u64)),
                write_pgm(&GrayFrame::filled(w, h, i as u8)),
            )
            .unwrap();
        }
    }

    fn record(dir: &Path, start: u64, end: u64) -> SequenceRecord {
        SequenceRecord {
            dir: dir.to_path_buf(),
            label: None,
            start,
            end,
        }
    }

    #[test]
    fn sequence_loading() {
        let tmp = tempfile::tempdir().unwrap();
        write_frames(tmp.path(), &[(4, 4); 3]);
        let seq = load_sequence(&record(tmp.path(), 0, 2)).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.frames[2].get(0, 0), 2);

        let sub = load_sequence(&record(tmp.path(), 1, 2)).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.frames[0].get(0, 0), 1);

        assert_eq!(
            scan_frame_dir(tmp.path()).unwrap(),
            record(tmp.path(), 0, 2)
        );
    }

    #[test]
    fn sequence_missing_frame() {
        let tmp = tempfile::tempdir().unwrap();
        write_frames(tmp.path(), &[(4, 4); 3]);
        fs::remove_file(tmp.path().join("000001.pgm")).unwrap();
        let err = load_sequence(&record(tmp.path(), 0, 2)).unwrap_err();
        assert!(matches!(err, SequenceError::MissingFrame { index: 1, .. }));
    }

    #[test]
    fn sequence_dimension_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        write_frames(tmp.path(), &[(4, 4), (5, 4), (4, 4)]);
        let err = load_sequence(&record(tmp.path(), 0, 2)).unwrap_err();
        assert!(matches!(
            err,
            SequenceError::DimensionMismatch { index: 1, .. }
        ));
    }

    #[test]
    fn manifest_file_resolves_relative_dirs() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.jsonl");
        fs::write(&path, "{\"dir\":\"seq\",\"start\":0,\"end\":0}\n").unwrap();
        let recs = load_manifest_file(&path).unwrap();
        assert_eq!(recs[0].dir, tmp.path().join("seq"));
    }
}
