//! Synthetic action clips: a white rectangle on black, moved by a simple
//! motion program with per-frame ±1 px jitter.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mhi_core::imgio::{self, GrayFrame, SequenceRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    /// Constant velocity in px/frame.
    Translate { dx: i64, dy: i64 },
    /// Sinusoidal back-and-forth along one axis.
    Oscillate {
        axis: Axis,
        period: usize,
        amplitude: i64,
    },
    /// The rectangle grows by `rate` px per side per frame for half a
    /// period, then shrinks back.
    ExpandContract { rate: i64, period: usize },
}

fn default_frames() -> usize {
    30
}
fn default_size() -> usize {
    64
}
fn default_rect_width() -> usize {
    10
}
fn default_rect_height() -> usize {
    16
}
fn default_count() -> usize {
    1
}

/// One action class to render. `count` clips are produced, each with its
/// own jittered trajectory and start position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub class: String,
    pub motion: Motion,
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_size")]
    pub width: usize,
    #[serde(default = "default_size")]
    pub height: usize,
    #[serde(default = "default_rect_width")]
    pub rect_width: usize,
    #[serde(default = "default_rect_height")]
    pub rect_height: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Top-left corner of the rectangle at frame 0 (before jitter). Chosen
    /// at random per clip when absent.
    #[serde(default)]
    pub origin: Option<(i64, i64)>,
    /// Disable the ±1 px per-frame jitter.
    #[serde(default)]
    pub no_jitter: bool,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class.is_empty()
            || !self
                .class
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            bail!("class name {:?} must be nonempty [A-Za-z0-9_-]", self.class);
        }
        if self.frames < 2 {
            bail!("{}: frames must be >= 2", self.class);
        }
        if self.width == 0 || self.height == 0 || self.rect_width == 0 || self.rect_height == 0 {
            bail!("{}: image and rectangle sizes must be nonzero", self.class);
        }
        if self.count == 0 {
            bail!("{}: count must be >= 1", self.class);
        }
        match self.motion {
            Motion::Translate { dx, dy } if dx.abs().max(dy.abs()) < 1 => {
                bail!("{}: translate speed must be >= 1 px/frame", self.class)
            }
            Motion::Oscillate { period, .. } | Motion::ExpandContract { period, .. }
                if period < 2 =>
            {
                bail!("{}: period must be >= 2", self.class)
            }
            _ => Ok(()),
        }
    }

    /// Offset of the rectangle's top-left corner and per-side growth at
    /// frame `t`, relative to the origin.
    fn pose(&self, t: usize) -> (i64, i64, i64) {
        match self.motion {
            Motion::Translate { dx, dy } => (dx * t as i64, dy * t as i64, 0),
            Motion::Oscillate {
                axis,
                period,
                amplitude,
            } => {
                let off =
                    (amplitude as f64 * (TAU * t as f64 / period as f64).sin()).round() as i64;
                match axis {
                    Axis::X => (off, 0, 0),
                    Axis::Y => (0, off, 0),
                }
            }
            Motion::ExpandContract { rate, period } => {
                let phase = t % period;
                let grow = rate * phase.min(period - phase) as i64;
                (0, 0, grow)
            }
        }
    }

    /// Picks an origin that keeps the whole trajectory (plus jitter) in
    /// frame when possible, else centers it.
    fn pick_origin(&self, rng: &mut ChaCha8Rng) -> (i64, i64) {
        if let Some(o) = self.origin {
            return o;
        }
        let (mut min_x, mut max_x, mut min_y, mut max_y) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for t in 0..self.frames {
            let (ox, oy, g) = self.pose(t);
            min_x = min_x.min(ox - g);
            max_x = max_x.max(ox + self.rect_width as i64 + g);
            min_y = min_y.min(oy - g);
            max_y = max_y.max(oy + self.rect_height as i64 + g);
        }
        let mut axis = |lo: i64, hi: i64, size: usize| {
            let free = size as i64 - (hi - lo) - 2;
            if free >= 0 {
                -lo + 1 + rng.gen_range(0..=free)
            } else {
                -lo + (size as i64 - (hi - lo)) / 2
            }
        };
        let x = axis(min_x, max_x, self.width);
        let y = axis(min_y, max_y, self.height);
        (x, y)
    }

    /// Frames of clip number `instance`.
    pub fn render(&self, instance: usize) -> Vec<GrayFrame> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(instance as u64);
        let (x0, y0) = self.pick_origin(&mut rng);
        (0..self.frames)
            .map(|t| {
                let (ox, oy, g) = self.pose(t);
                let (jx, jy) = if self.no_jitter {
                    (0, 0)
                } else {
                    (rng.gen_range(-1..=1), rng.gen_range(-1..=1))
                };
                let left = x0 + ox - g + jx;
                let top = y0 + oy - g + jy;
                draw_rect(
                    self.width,
                    self.height,
                    left,
                    top,
                    self.rect_width as i64 + 2 * g,
                    self.rect_height as i64 + 2 * g,
                )
            })
            .collect()
    }
}

fn draw_rect(width: usize, height: usize, left: i64, top: i64, w: i64, h: i64) -> GrayFrame {
    let mut f = GrayFrame::filled(width, height, 0);
    let x_range = left.max(0)..(left + w).min(width as i64);
    let y_range = top.max(0)..(top + h).min(height as i64);
    for y in y_range {
        for x in x_range.clone() {
            f.set(x as usize, y as usize, 255);
        }
    }
    f
}

pub fn parse_specs(text: &str) -> Result<Vec<SynthSpec>> {
    let specs: Vec<SynthSpec> =
        serde_json::from_str(text).context("synth spec must be a JSON array of specs")?;
    if specs.is_empty() {
        bail!("synth spec list is empty");
    }
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

/// Renders every clip into `out_dir/<class>_<NNN>/` and writes
/// `out_dir/manifest.jsonl` with directories relative to `out_dir`.
pub fn generate(specs: &[SynthSpec], out_dir: &Path) -> Result<Vec<SequenceRecord>> {
    let mut records = Vec::new();
    for spec in specs {
        spec.validate()?;
        for i in 0..spec.count {
            let name = format!("{}_{:03}", spec.class, i);
            let frames = spec.render(i);
            imgio::write_sequence(&out_dir.join(&name), &frames)
                .with_context(|| format!("writing frames for {name}"))?;
            records.push(SequenceRecord {
                dir: name.into(),
                label: Some(spec.class.clone()),
                start: 0,
                end: spec.frames as u64 - 1,
            });
        }
    }
    fs::write(
        out_dir.join("manifest.jsonl"),
        imgio::write_manifest(&records),
    )
    .context("writing manifest")?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(motion: Motion) -> SynthSpec {
        serde_json::from_value(serde_json::json!({
            "class": "c",
            "motion": serde_json::to_value(motion).unwrap(),
            "frames": 20,
            "width": 80,
            "height": 40,
            "seed": 5,
        }))
        .unwrap()
    }

    fn left_edge(f: &GrayFrame) -> usize {
        (0..f.width())
            .find(|&x| (0..f.height()).any(|y| f.get(x, y) == 255))
            .unwrap()
    }

    #[test]
    fn translate_moves_two_pixels_per_frame() {
        let s = spec(Motion::Translate { dx: 2, dy: 0 });
        let frames = s.render(0);
        let x0 = left_edge(&frames[0]) as i64;
        for (t, f) in frames.iter().enumerate() {
            let x = left_edge(f) as i64;
            // Each frame carries its own jitter, so allow ±2 against frame 0.
            assert!((x - (x0 + 2 * t as i64)).abs() <= 2, "t={t}");
        }
        let mut exact = s.clone();
        exact.no_jitter = true;
        exact.origin = Some((3, 5));
        for (t, f) in exact.render(0).iter().enumerate() {
            assert_eq!(left_edge(f), 3 + 2 * t);
        }
    }

    #[test]
    fn deterministic_per_seed_and_instance() {
        let s = spec(Motion::Oscillate {
            axis: Axis::Y,
            period: 8,
            amplitude: 5,
        });
        assert_eq!(s.render(3), s.render(3));
        assert_ne!(s.render(3), s.render(4));
    }

    #[test]
    fn expand_contract_changes_area() {
        let mut s = spec(Motion::ExpandContract { rate: 2, period: 8 });
        s.no_jitter = true;
        let frames = s.render(0);
        let area = |f: &GrayFrame| f.data().iter().filter(|&&v| v == 255).count();
        assert_eq!(area(&frames[0]), 10 * 16);
        assert_eq!(area(&frames[4]), 26 * 32);
        assert_eq!(area(&frames[8]), 10 * 16);
    }

    #[test]
    fn validation() {
        assert!(spec(Motion::Translate { dx: 0, dy: 0 }).validate().is_err());
        let mut s = spec(Motion::Translate { dx: 1, dy: 0 });
        s.frames = 1;
        assert!(s.validate().is_err());
        let mut s = spec(Motion::Translate { dx: 1, dy: 0 });
        s.class = "../x".into();
        assert!(s.validate().is_err());
        assert!(parse_specs("[]").is_err());
        assert!(parse_specs("{\"class\":1}").is_err());
    }

    #[test]
    fn writes_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let mut a = spec(Motion::Translate { dx: 2, dy: 0 });
        a.class = "a".into();
        let mut b = a.clone();
        b.class = "b".into();
        let recs = generate(&[a, b], tmp.path()).unwrap();
        assert_eq!(recs.len(), 2);
        let text = fs::read_to_string(tmp.path().join("manifest.jsonl")).unwrap();
        assert_eq!(imgio::load_manifest(&text).unwrap(), recs);
        assert!(tmp.path().join("b_000/000019.pgm").exists());
    }
}
