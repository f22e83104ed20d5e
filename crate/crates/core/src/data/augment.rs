//! Basic stochastic augmentation: horizontal flip, padded random crop,
//! rotation and translation.
//!
//! Samples are viewed as `[channels, height, width]`; a `[h, w]` sample has
//! one channel. Flat `[d]` feature vectors have no spatial axes, so
//! [`augment_sample`] passes them through unchanged; the helpers still
//! accept them as a single row. All resampling is nearest-neighbour and
//! uncovered pixels are filled with 0, so values stay inside the input
//! range.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const MAX_ROTATION_DEGREES: f64 = 15.0;
pub const MAX_TRANSLATION_FRACTION: f64 = 0.125;
/// Crop padding bound, in pixels at a 32x32 reference resolution.
pub const MAX_CROP_PADDING: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlipConfig {
    pub enabled: bool,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    pub enabled: bool,
    pub p: f64,
    /// Zero padding before cropping back to the original size, in pixels at
    /// 32x32 scale; the applied padding is scaled to the sample's longer side.
    pub padding: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RotationConfig {
    pub enabled: bool,
    pub p: f64,
    pub max_degrees: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslationConfig {
    pub enabled: bool,
    pub p: f64,
    /// Largest shift as a fraction of the side length.
    pub max_fraction: f64,
}

impl Default for FlipConfig {
    fn default() -> Self {
        FlipConfig { enabled: true, p: 0.5 }
    }
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig {
            enabled: true,
            p: 0.5,
            padding: 4,
        }
    }
}

impl Default for RotationConfig {
    fn default() -> Self {
        RotationConfig {
            enabled: true,
            p: 0.5,
            max_degrees: 15.0,
        }
    }
}

impl Default for TranslationConfig {
    fn default() -> Self {
        TranslationConfig {
            enabled: true,
            p: 0.5,
            max_fraction: 0.125,
        }
    }
}

/// Which transforms run, with what probability and magnitude. Transforms
/// are applied in the order flip, crop, rotation, translation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub flip: FlipConfig,
    pub crop: CropConfig,
    pub rotation: RotationConfig,
    pub translation: TranslationConfig,
}

impl AugmentPolicy {
    /// Every transform disabled.
    pub fn identity() -> Self {
        AugmentPolicy {
            flip: FlipConfig { enabled: false, p: 0.0 },
            crop: CropConfig {
                enabled: false,
                p: 0.0,
                padding: 0,
            },
            rotation: RotationConfig {
                enabled: false,
                p: 0.0,
                max_degrees: 0.0,
            },
            translation: TranslationConfig {
                enabled: false,
                p: 0.0,
                max_fraction: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.flip.p, self.crop.p, self.rotation.p, self.translation.p];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Policy(format!("probabilities {probs:?} outside [0, 1]")));
        }
        if !(0.0..=MAX_ROTATION_DEGREES).contains(&self.rotation.max_degrees) {
            return Err(Error::Policy(format!(
                "rotation {} deg outside [0, {MAX_ROTATION_DEGREES}]",
                self.rotation.max_degrees
            )));
        }
        if !(0.0..=MAX_TRANSLATION_FRACTION).contains(&self.translation.max_fraction) {
            return Err(Error::Policy(format!(
                "translation fraction {} outside [0, {MAX_TRANSLATION_FRACTION}]",
                self.translation.max_fraction
            )));
        }
        if self.crop.padding > MAX_CROP_PADDING {
            return Err(Error::Policy(format!(
                "crop padding {} above {MAX_CROP_PADDING}",
                self.crop.padding
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Geometry {
    pub fn of(shape: &[usize]) -> Self {
        match *shape {
            [c, h, w] => Geometry {
                channels: c,
                height: h,
                width: w,
            },
            [h, w] => Geometry {
                channels: 1,
                height: h,
                width: w,
            },
            _ => Geometry {
                channels: 1,
                height: 1,
                width: shape.iter().product(),
            },
        }
    }

    fn len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Mirrors every row left to right.
pub fn hflip(sample: &[f32], geom: Geometry) -> Vec<f32> {
    sample
        .chunks_exact(geom.width)
        .flat_map(|row| row.iter().rev().copied())
        .collect()
}

/// Moves content by `(dy, dx)` pixels, filling with 0.
pub fn shift(sample: &[f32], geom: Geometry, dy: isize, dx: isize) -> Vec<f32> {
    resample(sample, geom, |y, x| {
        (y as isize - dy, x as isize - dx)
    })
}

/// Rotates about the centre by `degrees`, nearest-neighbour, filling with 0.
pub fn rotate(sample: &[f32], geom: Geometry, degrees: f64) -> Vec<f32> {
    if geom.height < 2 {
        return sample.to_vec();
    }
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (geom.height as f64 - 1.0) / 2.0;
    let cx = (geom.width as f64 - 1.0) / 2.0;
    resample(sample, geom, |y, x| {
        // Inverse map: destination pixel back to its source.
        let (ry, rx) = (y as f64 - cy, x as f64 - cx);
        let sy = cos * ry - sin * rx + cy;
        let sx = sin * ry + cos * rx + cx;
        (sy.round() as isize, sx.round() as isize)
    })
}

fn resample(sample: &[f32], geom: Geometry, source: impl Fn(usize, usize) -> (isize, isize)) -> Vec<f32> {
    let mut out = vec![0.0f32; geom.len()];
    let plane = geom.height * geom.width;
    for y in 0..geom.height {
        for x in 0..geom.width {
            let (sy, sx) = source(y, x);
            if sy < 0 || sx < 0 || sy as usize >= geom.height || sx as usize >= geom.width {
                continue;
            }
            let (sy, sx) = (sy as usize, sx as usize);
            for c in 0..geom.channels {
                out[c * plane + y * geom.width + x] = sample[c * plane + sy * geom.width + sx];
            }
        }
    }
    out
}

/// Applies `policy` to one image sample. The output depends only on the
/// inputs, so any evaluation order over a batch produces identical bytes.
pub fn augment_sample(sample: &[f32], shape: &[usize], policy: &AugmentPolicy, seed: u64) -> Vec<f32> {
    if shape.len() < 2 {
        return sample.to_vec();
    }
    let geom = Geometry::of(shape);
    debug_assert_eq!(sample.len(), geom.len());
    let mut rng = seed::rng_for(seed, &[seed::STREAM_TRANSFORM]);
    let mut out = sample.to_vec();
    let fires = |p: f64, rng: &mut rand_chacha::ChaCha8Rng| p > 0.0 && rng.random::<f64>() < p;

    if policy.flip.enabled && fires(policy.flip.p, &mut rng) {
        out = hflip(&out, geom);
    }
    if policy.crop.enabled && fires(policy.crop.p, &mut rng) {
        let side = geom.height.max(geom.width) as f64;
        let pad = (policy.crop.padding as f64 * side / 32.0).round() as isize;
        if pad > 0 {
            // Cropping a window at offset (oy, ox) from the padded image is a
            // shift by (pad - oy, pad - ox).
            let dy = if geom.height > 1 {
                pad - rng.random_range(0..=2 * pad as i64) as isize
            } else {
                0
            };
            let dx = pad - rng.random_range(0..=2 * pad as i64) as isize;
            out = shift(&out, geom, dy, dx);
        }
    }
    if policy.rotation.enabled && fires(policy.rotation.p, &mut rng) && policy.rotation.max_degrees > 0.0 {
        let m = policy.rotation.max_degrees;
        out = rotate(&out, geom, rng.random_range(-m..=m));
    }
    if policy.translation.enabled && fires(policy.translation.p, &mut rng) {
        let max_dy = (policy.translation.max_fraction * geom.height as f64).round() as isize;
        let max_dx = (policy.translation.max_fraction * geom.width as f64).round() as isize;
        let dy = if max_dy > 0 { rng.random_range(-max_dy as i64..=max_dy as i64) as isize } else { 0 };
        let dx = if max_dx > 0 { rng.random_range(-max_dx as i64..=max_dx as i64) as isize } else { 0 };
        out = shift(&out, geom, dy, dx);
    }
    out
}
