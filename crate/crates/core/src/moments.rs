//! Image moments and moment invariants.
//!
//! Coordinates follow the raster: `x` is the zero-based column, `y` the
//! zero-based row. Moments are tracked up to third order, which is all the
//! seven Hu invariants and the Flusser third-order invariant need.

use thiserror::Error;

use crate::imgio::GrayFrame;
use crate::imgproc::BinaryMask;
use crate::temporal::{MotionHistory, TemporalTemplate};

/// Number of invariants per image: Hu 1..7 plus Flusser's I8.
pub const INVARIANTS_PER_IMAGE: usize = 8;
/// MHI invariants followed by MEI invariants.
pub const FEATURE_LEN: usize = 2 * INVARIANTS_PER_IMAGE;
/// Offset inside the signed-log feature conditioning.
pub const FEATURE_EPSILON: f64 = 1e-12;

const MAX_ORDER: usize = 3;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum MomentError {
    #[error("image has zero mass")]
    ZeroMass,
    #[error("template contains no motion")]
    NoMotion,
}

/// Real-valued raster fed to the moment computations.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    /// Panics if `data.len() != width * height`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "raster data length");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn pixels(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(i, &v)| ((i % w) as f64, (i / w) as f64, v))
    }
}

impl From<&MotionHistory> for Raster {
    fn from(h: &MotionHistory) -> Self {
        Raster::new(h.width(), h.height(), h.values().to_vec())
    }
}

impl From<&BinaryMask> for Raster {
    fn from(m: &BinaryMask) -> Self {
        Raster::new(
            m.width(),
            m.height(),
            m.data().iter().map(|&v| v as f64).collect(),
        )
    }
}

impl From<&GrayFrame> for Raster {
    fn from(f: &GrayFrame) -> Self {
        Raster::new(
            f.width(),
            f.height(),
            f.data().iter().map(|&v| v as f64).collect(),
        )
    }
}

/// `Σ x^i y^j I(x, y)`.
pub fn raw_moment(img: &Raster, i: u32, j: u32) -> f64 {
    img.pixels()
        .map(|(x, y, v)| x.powi(i as i32) * y.powi(j as i32) * v)
        .sum()
}

pub fn centroid(img: &Raster) -> Result<(f64, f64), MomentError> {
    let (mut m00, mut m10, mut m01) = (0.0, 0.0, 0.0);
    for (x, y, v) in img.pixels() {
        m00 += v;
        m10 += x * v;
        m01 += y * v;
    }
    if m00 == 0.0 {
        return Err(MomentError::ZeroMass);
    }
    Ok((m10 / m00, m01 / m00))
}

/// `Σ (x − x̄)^p (y − ȳ)^q I(x, y)` about the intensity centroid.
pub fn central_moment(img: &Raster, p: u32, q: u32) -> Result<f64, MomentError> {
    let (cx, cy) = centroid(img)?;
    Ok(img
        .pixels()
        .map(|(x, y, v)| (x - cx).powi(p as i32) * (y - cy).powi(q as i32) * v)
        .sum())
}

/// Raw, central and scale-normalized moments up to third order.
///
/// All tables are indexed `[p][q]`; only entries with `p + q ≤ 3` are
/// meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub raw: [[f64; 4]; 4],
    pub centroid: (f64, f64),
    pub central: [[f64; 4]; 4],
    pub nu: [[f64; 4]; 4],
}

impl MomentSet {
    pub fn m(&self, i: usize, j: usize) -> f64 {
        self.raw[i][j]
    }

    pub fn mu(&self, p: usize, q: usize) -> f64 {
        self.central[p][q]
    }

    pub fn nu(&self, p: usize, q: usize) -> f64 {
        self.nu[p][q]
    }
}

/// Computes every moment table in two passes over the nonzero pixels: the
/// first for raw moments (and hence the centroid), the second for central
/// moments taken directly about the centroid.
pub fn scale_invariant_moments(img: &Raster) -> Result<MomentSet, MomentError> {
    let mut raw = [[0.0; 4]; 4];
    for (x, y, v) in img.pixels() {
        let xs = [1.0, x, x * x, x * x * x];
        let ys = [1.0, y, y * y, y * y * y];
        for p in 0..=MAX_ORDER {
            for q in 0..=MAX_ORDER - p {
                raw[p][q] += xs[p] * ys[q] * v;
            }
        }
    }
    let m00 = raw[0][0];
    if m00 == 0.0 {
        return Err(MomentError::ZeroMass);
    }
    let (cx, cy) = (raw[1][0] / m00, raw[0][1] / m00);

    let mut central = [[0.0; 4]; 4];
    for (x, y, v) in img.pixels() {
        let (dx, dy) = (x - cx, y - cy);
        let xs = [1.0, dx, dx * dx, dx * dx * dx];
        let ys = [1.0, dy, dy * dy, dy * dy * dy];
        for p in 0..=MAX_ORDER {
            for q in 0..=MAX_ORDER - p {
                central[p][q] += xs[p] * ys[q] * v;
            }
        }
    }
    // Exact by construction of the centroid.
    central[0][0] = m00;
    central[1][0] = 0.0;
    central[0][1] = 0.0;

    let mut nu = [[0.0; 4]; 4];
    for p in 0..=MAX_ORDER {
        for q in 0..=MAX_ORDER - p {
            let exponent = 1.0 + (p + q) as f64 / 2.0;
            nu[p][q] = central[p][q] / m00.powf(exponent);
        }
    }

    Ok(MomentSet {
        raw,
        centroid: (cx, cy),
        central,
        nu,
    })
}

/// The seven Hu invariants.
pub fn hu_moments(ms: &MomentSet) -> [f64; 7] {
    let n20 = ms.nu(2, 0);
    let n02 = ms.nu(0, 2);
    let n11 = ms.nu(1, 1);
    let n30 = ms.nu(3, 0);
    let n03 = ms.nu(0, 3);
    let n21 = ms.nu(2, 1);
    let n12 = ms.nu(1, 2);

    let a = n30 + n12;
    let b = n21 + n03;
    let c = n30 - 3.0 * n12;
    let d = 3.0 * n21 - n03;

    let h1 = n20 + n02;
    let h2 = (n20 - n02).powi(2) + 4.0 * n11 * n11;
    let h3 = c * c + d * d;
    let h4 = a * a + b * b;
    let h5 = c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b);
    let h6 = (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b;
    let h7 = d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b);
    [h1, h2, h3, h4, h5, h6, h7]
}

/// Flusser's third-order invariant
/// `ν11[(ν30+ν12)² − (ν03+ν21)²] − (ν20−ν02)(ν30+ν12)(ν03+ν21)`.
pub fn flusser_i8(ms: &MomentSet) -> f64 {
    let a = ms.nu(3, 0) + ms.nu(1, 2);
    let b = ms.nu(0, 3) + ms.nu(2, 1);
    ms.nu(1, 1) * (a * a - b * b) - (ms.nu(2, 0) - ms.nu(0, 2)) * a * b
}

/// Hu 1..7 followed by I8 for a single image.
pub fn image_invariants(img: &Raster) -> Result<[f64; INVARIANTS_PER_IMAGE], MomentError> {
    let ms = scale_invariant_moments(img)?;
    let hu = hu_moments(&ms);
    let mut out = [0.0; INVARIANTS_PER_IMAGE];
    out[..7].copy_from_slice(&hu);
    out[7] = flusser_i8(&ms);
    Ok(out)
}

/// Sign-preserving log compression: `sign(f) · log10(1 + |f| / ε)`.
pub fn condition(value: f64) -> f64 {
    value.signum() * (value.abs() / FEATURE_EPSILON).ln_1p() / std::f64::consts::LN_10
}

/// Conditioned invariants of a template: MHI block then MEI block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn feature_vector(t: &TemporalTemplate) -> Result<FeatureVector, MomentError> {
    if t.mhi.mass() == 0.0 {
        return Err(MomentError::NoMotion);
    }
    let mhi = image_invariants(&Raster::from(&t.mhi)).map_err(|_| MomentError::NoMotion)?;
    let mei = image_invariants(&Raster::from(&t.mei)).map_err(|_| MomentError::NoMotion)?;
    let mut out = [0.0; FEATURE_LEN];
    for (dst, &src) in out.iter_mut().zip(mhi.iter().chain(&mei)) {
        let c = condition(src);
        // Fold -0.0 into 0.0.
        *dst = if c == 0.0 { 0.0 } else { c };
    }
    Ok(FeatureVector(out))
}
