//! Secondary-blob check on motion-energy images. A second sizeable motion
//! region (typically a shadow) corrupts the moments of the template.

use mhi_core::BinaryMask;
use serde::Serialize;

/// Fraction of the image area a component must exceed to count.
pub const SIGNIFICANT_AREA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlobDiagnostic {
    /// All 8-connected components, including tiny ones.
    pub component_count: usize,
    /// True when at least two components each exceed 1% of the image.
    pub warning: bool,
}

/// Areas of the 8-connected components of `mask`, in scan order of their
/// first pixel.
pub fn component_areas(mask: &BinaryMask) -> Vec<usize> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || mask.data()[start] == 0 {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            area += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && mask.data()[j] != 0 {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        areas.push(area);
    }
    areas
}

pub fn detect_secondary_blob(mask: &BinaryMask) -> BlobDiagnostic {
    let areas = component_areas(mask);
    let limit = SIGNIFICANT_AREA * (mask.width() * mask.height()) as f64;
    let significant = areas.iter().filter(|&&a| a as f64 > limit).count();
    BlobDiagnostic {
        component_count: areas.len(),
        warning: significant >= 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: usize, y0: usize, w: usize, h: usize) -> impl Fn(usize, usize) -> bool {
        move |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
    }

    #[test]
    fn single_blob() {
        let m = BinaryMask::from_fn(100, 100, rect(10, 10, 30, 30));
        assert_eq!(
            detect_secondary_blob(&m),
            BlobDiagnostic {
                component_count: 1,
                warning: false
            }
        );
    }

    #[test]
    fn two_large_blobs() {
        let a = rect(0, 0, 40, 25);
        let b = rect(50, 50, 40, 25);
        let m = BinaryMask::from_fn(100, 100, |x, y| a(x, y) || b(x, y));
        assert_eq!(component_areas(&m), vec![1000, 1000]);
        assert_eq!(
            detect_secondary_blob(&m),
            BlobDiagnostic {
                component_count: 2,
                warning: true
            }
        );
    }

    #[test]
    fn blob_and_speck() {
        let a = rect(10, 10, 30, 30);
        let m = BinaryMask::from_fn(100, 100, |x, y| {
            a(x, y) || (y == 80 && (x == 80 || x == 81))
        });
        assert_eq!(
            detect_secondary_blob(&m),
            BlobDiagnostic {
                component_count: 2,
                warning: false
            }
        );
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let m = BinaryMask::from_fn(4, 4, |x, y| x == y);
        assert_eq!(component_areas(&m), vec![4]);
    }

    #[test]
    fn empty_mask() {
        let m = BinaryMask::zeros(5, 5);
        assert_eq!(detect_secondary_blob(&m).component_count, 0);
    }
}
