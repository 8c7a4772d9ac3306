//! Motion-history and motion-energy temporal templates.
//!
//! Each pixel of a motion history is set to `tau` whenever the binary
//! motion mask fires there and otherwise decays by one per frame, floored
//! at zero. The motion-energy image is the union of all masks in the same
//! window.

use thiserror::Error;

use crate::imgio::{FrameSequence, GrayFrame};
use crate::imgproc::{self, BinaryMask, DimensionMismatch};

/// Default history length in frames.
pub const DEFAULT_TAU: u32 = 300;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemporalError {
    #[error(transparent)]
    DimensionMismatch(#[from] DimensionMismatch),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("tau must be at least 1")]
    InvalidTau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionHistory {
    width: usize,
    height: usize,
    tau: u32,
    values: Vec<f64>,
}

impl MotionHistory {
    pub fn zeros(width: usize, height: usize, tau: u32) -> Result<Self, TemporalError> {
        if tau == 0 {
            return Err(TemporalError::InvalidTau);
        }
        Ok(Self {
            width,
            height,
            tau,
            values: vec![0.0; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Pixels with nonzero history.
    pub fn support(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.get(x, y) > 0.0)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Applies one step of the recurrence in place.
    pub fn update(&mut self, mask: &BinaryMask) -> Result<(), DimensionMismatch> {
        if mask.width() != self.width || mask.height() != self.height {
            return Err(DimensionMismatch {
                left: (self.width, self.height),
                right: (mask.width(), mask.height()),
            });
        }
        let tau = self.tau as f64;
        for (h, &m) in self.values.iter_mut().zip(mask.data()) {
            *h = if m != 0 { tau } else { (*h - 1.0).max(0.0) };
        }
        Ok(())
    }
}

/// One step of the motion-history recurrence.
pub fn mhi_step(
    prev: &MotionHistory,
    mask: &BinaryMask,
) -> Result<MotionHistory, DimensionMismatch> {
    let mut next = prev.clone();
    next.update(mask)?;
    Ok(next)
}

/// MHI + MEI for one window of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalTemplate {
    pub mhi: MotionHistory,
    pub mei: BinaryMask,
    /// Absolute (first, last) frame indices that fed the template.
    pub frame_span: (u64, u64),
}

/// Cleaned motion masks for consecutive frame pairs: element `i` compares
/// frames `i` and `i + 1` after smoothing, then opens the result.
pub fn motion_masks(frames: &[GrayFrame], theta: u8) -> Result<Vec<BinaryMask>, TemporalError> {
    if frames.len() < 2 {
        return Err(TemporalError::TooFewFrames(frames.len()));
    }
    let smoothed: Vec<GrayFrame> = frames.iter().map(imgproc::gaussian_smooth).collect();
    smoothed
        .windows(2)
        .map(|pair| {
            imgproc::frame_diff(&pair[0], &pair[1], theta)
                .map(|m| imgproc::morph_open(&m))
                .map_err(TemporalError::from)
        })
        .collect()
}

/// Folds the trailing `min(masks.len(), tau)` masks into a template.
///
/// `last_frame` is the absolute index of the frame after the final mask,
/// used only to fill in `frame_span`.
pub fn template_from_masks(
    masks: &[BinaryMask],
    tau: u32,
    last_frame: u64,
) -> Result<TemporalTemplate, TemporalError> {
    let first = masks.first().ok_or(TemporalError::TooFewFrames(1))?;
    let steps = masks.len().min(tau as usize);
    let window = &masks[masks.len() - steps..];
    let mut mhi = MotionHistory::zeros(first.width(), first.height(), tau)?;
    let mut mei = BinaryMask::zeros(first.width(), first.height());
    for mask in window {
        mhi.update(mask)?;
        mei.union_with(mask)?;
    }
    Ok(TemporalTemplate {
        mhi,
        mei,
        frame_span: (last_frame - steps as u64, last_frame),
    })
}

/// Full pipeline from frames to template: smooth, difference with `theta`,
/// open, and accumulate the trailing `tau` steps.
pub fn build_templates(
    seq: &FrameSequence,
    theta: u8,
    tau: u32,
) -> Result<TemporalTemplate, TemporalError> {
    if tau == 0 {
        return Err(TemporalError::InvalidTau);
    }
    let masks = motion_masks(&seq.frames, theta)?;
    let last = seq.record.start + seq.frames.len() as u64 - 1;
    template_from_masks(&masks, tau, last)
}

/// Display form of a history: `round(255 · value / tau)`, half-up.
pub fn normalize_mhi(mhi: &MotionHistory) -> GrayFrame {
    let tau = mhi.tau as f64;
    let data = mhi
        .values
        .iter()
        .map(|&v| ((255.0 * v) / tau + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    GrayFrame::new(mhi.width, mhi.height, data).expect("history dimensions are valid")
}
