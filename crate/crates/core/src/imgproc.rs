//! Per-frame preprocessing: smoothing, thresholded differencing and
//! binary morphology.

use thiserror::Error;

use crate::imgio::GrayFrame;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("dimension mismatch: {left:?} vs {right:?}")]
pub struct DimensionMismatch {
    pub left: (usize, usize),
    pub right: (usize, usize),
}

/// Row-major mask with values in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    /// Builds a mask from arbitrary bytes; any nonzero byte becomes 1.
    ///
    /// Panics if `data.len() != width * height`.
    pub fn from_values(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height, "mask data length");
        Self {
            width,
            height,
            data: data.into_iter().map(|v| u8::from(v != 0)).collect(),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self {
            width,
            height,
            data,
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Pixelwise OR into `self`.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), DimensionMismatch> {
        self.check_dims(other.width, other.height)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
        Ok(())
    }

    /// `true` when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }

    /// Scales to a displayable frame: 0 → 0, 1 → 255.
    pub fn to_frame(&self) -> GrayFrame {
        GrayFrame::new(
            self.width,
            self.height,
            self.data.iter().map(|&v| v * 255).collect(),
        )
        .expect("mask dimensions are valid")
    }

    fn check_dims(&self, width: usize, height: usize) -> Result<(), DimensionMismatch> {
        if self.width != width || self.height != height {
            return Err(DimensionMismatch {
                left: (self.width, self.height),
                right: (width, height),
            });
        }
        Ok(())
    }
}

/// 3×3 binomial smoothing, `[1,2,1] ⊗ [1,2,1] / 16`, with edge replication
/// and round-half-up. Integer arithmetic throughout, so the result is
/// identical to the direct 2-D convolution.
pub fn gaussian_smooth(frame: &GrayFrame) -> GrayFrame {
    let (w, h) = (frame.width(), frame.height());
    let src = frame.data();

    // Horizontal pass, unnormalized (range 0..=1020).
    let mut rows = vec![0u32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let l = row[x.saturating_sub(1)] as u32;
            let c = row[x] as u32;
            let r = row[(x + 1).min(w - 1)] as u32;
            rows[y * w + x] = l + 2 * c + r;
        }
    }

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let up = y.saturating_sub(1) * w;
        let mid = y * w;
        let down = (y + 1).min(h - 1) * w;
        for x in 0..w {
            let sum = rows[up + x] + 2 * rows[mid + x] + rows[down + x];
            out.push(((sum + 8) / 16) as u8);
        }
    }
    GrayFrame::new(w, h, out).expect("same dimensions as input")
}

/// `mask(x,y) = 1` iff `|curr − prev| > theta`.
pub fn frame_diff(
    prev: &GrayFrame,
    curr: &GrayFrame,
    theta: u8,
) -> Result<BinaryMask, DimensionMismatch> {
    if !prev.same_dims(curr) {
        return Err(DimensionMismatch {
            left: (prev.width(), prev.height()),
            right: (curr.width(), curr.height()),
        });
    }
    let data = prev
        .data()
        .iter()
        .zip(curr.data())
        .map(|(&a, &b)| u8::from(a.abs_diff(b) > theta))
        .collect();
    Ok(BinaryMask {
        width: prev.width(),
        height: prev.height(),
        data,
    })
}

/// Erosion by the 3×3 square; pixels outside the image count as 0, so
/// nothing on the border survives.
pub fn erode(mask: &BinaryMask) -> BinaryMask {
    square_filter(mask, 0, |a, b| a & b)
}

/// Dilation by the 3×3 square; pixels outside the image contribute nothing.
pub fn dilate(mask: &BinaryMask) -> BinaryMask {
    square_filter(mask, 0, |a, b| a | b)
}

/// Separable 3×3 min/max filter with a constant outside value.
fn square_filter(mask: &BinaryMask, outside: u8, op: impl Fn(u8, u8) -> u8) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let at = |v: &[u8], x: isize, y: isize| -> u8 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            outside
        } else {
            v[y as usize * w + x as usize]
        }
    };
    let mut horiz = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = op(
                op(at(&mask.data, x - 1, y), at(&mask.data, x, y)),
                at(&mask.data, x + 1, y),
            );
            horiz[y as usize * w + x as usize] = v;
        }
    }
    let mut data = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            data[y as usize * w + x as usize] = op(
                op(at(&horiz, x, y - 1), at(&horiz, x, y)),
                at(&horiz, x, y + 1),
            );
        }
    }
    BinaryMask {
        width: w,
        height: h,
        data,
    }
}

/// Morphological opening (erode, then dilate) with the 3×3 square.
pub fn morph_open(mask: &BinaryMask) -> BinaryMask {
    dilate(&erode(mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(w: usize, h: usize, data: Vec<u8>) -> GrayFrame {
        GrayFrame::new(w, h, data).unwrap()
    }

    /// Direct 3×3 convolution with clamped indices.
    fn smooth_oracle(f: &GrayFrame) -> GrayFrame {
        const K: [[u32; 3]; 3] = [[1, 2, 1], [2, 4, 2], [1, 2, 1]];
        let (w, h) = (f.width() as isize, f.height() as isize);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut s = 0;
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let sx = (x + dx).clamp(0, w - 1) as usize;
                        let sy = (y + dy).clamp(0, h - 1) as usize;
                        s += K[(dy + 1) as usize][(dx + 1) as usize] * f.get(sx, sy) as u32;
                    }
                }
                out.push(((s as f64) / 16.0 + 0.5).floor() as u8);
            }
        }
        frame(f.width(), f.height(), out)
    }

    #[test]
    fn smooth_constant() {
        let f = GrayFrame::filled(7, 5, 100);
        assert_eq!(gaussian_smooth(&f), f);
    }

    #[test]
    fn smooth_impulse() {
        let f = frame(3, 3, vec![0, 0, 0, 0, 16, 0, 0, 0, 0]);
        assert_eq!(gaussian_smooth(&f).data(), &[1, 2, 1, 2, 4, 2, 1, 2, 1]);
    }

    #[test]
    fn smooth_single_pixel() {
        let f = frame(1, 1, vec![42]);
        assert_eq!(gaussian_smooth(&f), f);
    }

    #[test]
    fn diff_threshold_is_strict() {
        let a = frame(1, 1, vec![10]);
        let b = frame(1, 1, vec![50]);
        assert_eq!(frame_diff(&a, &b, 25).unwrap().data(), &[1]);
        assert_eq!(frame_diff(&a, &b, 40).unwrap().data(), &[0]);
        assert_eq!(frame_diff(&a, &b, 39).unwrap().data(), &[1]);
        assert!(frame_diff(&a, &a, 0).unwrap().is_empty());
    }

    #[test]
    fn diff_dimension_mismatch() {
        let a = GrayFrame::filled(2, 2, 0);
        let b = GrayFrame::filled(2, 3, 0);
        assert!(frame_diff(&a, &b, 0).is_err());
    }

    #[test]
    fn open_removes_speck() {
        let m = BinaryMask::from_fn(5, 5, |x, y| x == 2 && y == 2);
        assert!(morph_open(&m).is_empty());
    }

    #[test]
    fn open_keeps_block() {
        let m = BinaryMask::from_fn(8, 8, |x, y| (2..6).contains(&x) && (2..6).contains(&y));
        assert_eq!(morph_open(&m), m);
        // Erosion leaves the 2×2 core.
        assert_eq!(erode(&m).count_ones(), 4);
    }

    #[test]
    fn open_all_zero() {
        let m = BinaryMask::zeros(6, 4);
        assert_eq!(morph_open(&m), m);
    }

    #[test]
    fn erosion_treats_outside_as_zero() {
        let m = BinaryMask::from_fn(4, 4, |_, _| true);
        let e = erode(&m);
        assert_eq!(
            e,
            BinaryMask::from_fn(4, 4, |x, y| (1..3).contains(&x) && (1..3).contains(&y))
        );
        assert_eq!(dilate(&e), m);
    }

    fn arb_frame_pair() -> impl Strategy<Value = (GrayFrame, GrayFrame)> {
        (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
            (
                proptest::collection::vec(any::<u8>(), w * h),
                proptest::collection::vec(any::<u8>(), w * h),
            )
                .prop_map(move |(a, b)| (frame(w, h, a), frame(w, h, b)))
        })
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..2, w * h)
                .prop_map(move |d| BinaryMask::from_values(w, h, d))
        })
    }

    proptest! {
        #[test]
        fn smooth_matches_direct_convolution((a, _) in arb_frame_pair()) {
            prop_assert_eq!(gaussian_smooth(&a), smooth_oracle(&a));
        }

        #[test]
        fn smooth_stays_in_range((a, _) in arb_frame_pair()) {
            let lo = *a.data().iter().min().unwrap();
            let hi = *a.data().iter().max().unwrap();
            for &v in gaussian_smooth(&a).data() {
                prop_assert!(v >= lo && v <= hi);
            }
        }

        #[test]
        fn diff_matches_pixel_oracle((a, b) in arb_frame_pair(), theta in any::<u8>()) {
            let m = frame_diff(&a, &b, theta).unwrap();
            for y in 0..a.height() {
                for x in 0..a.width() {
                    let d = (a.get(x, y) as i32 - b.get(x, y) as i32).abs();
                    prop_assert_eq!(m.get(x, y), d > theta as i32);
                }
            }
            prop_assert_eq!(m, frame_diff(&b, &a, theta).unwrap());
        }

        #[test]
        fn open_is_anti_extensive_and_idempotent(m in arb_mask()) {
            let o = morph_open(&m);
            prop_assert!(o.is_subset_of(&m));
            prop_assert_eq!(morph_open(&o), o);
        }
    }
}
