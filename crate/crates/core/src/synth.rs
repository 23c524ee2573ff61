//! Seeded synthetic scenes for recovery experiments and benchmarks: elliptical
//! foreground blobs over a background, each class with Gaussian colour noise,
//! plus boundary-flip corruption of masks.

use rand::seq::index::sample;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imgio::{BinaryMask, RgbImage};

/// Stained-tissue-like colour model.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub fg_mean: [f64; 3],
    pub bg_mean: [f64; 3],
    /// Per-channel standard deviation for both classes.
    pub sigma: f64,
    pub blobs: std::ops::RangeInclusive<usize>,
    pub radius: std::ops::RangeInclusive<f64>,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            fg_mean: [200.0, 60.0, 60.0],
            bg_mean: [230.0, 210.0, 210.0],
            sigma: 10.0,
            blobs: 4..=8,
            radius: 4.0..=9.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub image: RgbImage,
    pub truth: BinaryMask,
}

pub fn scene(params: &SceneParams, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (params.width, params.height);
    let count = rng.random_range(params.blobs.clone());
    let blobs: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(params.radius.clone()),
                rng.random_range(params.radius.clone()),
            )
        })
        .collect();
    let truth = BinaryMask::from_fn(w, h, |x, y| {
        blobs.iter().any(|&(cx, cy, rx, ry)| {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            dx * dx + dy * dy <= 1.0
        })
    })
    .expect("non-empty scene dimensions");

    let noise = Normal::new(0.0, params.sigma).expect("finite sigma");
    let pixels = truth
        .labels()
        .iter()
        .map(|&l| {
            let mean = if l == 1 {
                params.fg_mean
            } else {
                params.bg_mean
            };
            std::array::from_fn(|c| {
                (mean[c] + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8
            })
        })
        .collect();
    Scene {
        image: RgbImage::new(w, h, pixels).expect("matching length"),
        truth,
    }
}

/// Pixels with at least one 4-neighbor of the other label.
pub fn boundary_pixels(mask: &BinaryMask) -> Vec<usize> {
    let (w, h) = mask.dims();
    let l = mask.labels();
    (0..w * h)
        .filter(|&i| {
            let (x, y) = (i % w, i / w);
            (x > 0 && l[i - 1] != l[i])
                || (x + 1 < w && l[i + 1] != l[i])
                || (y > 0 && l[i - w] != l[i])
                || (y + 1 < h && l[i + w] != l[i])
        })
        .collect()
}

/// Flips a random `fraction` of the boundary pixels.
pub fn corrupt_boundary(mask: &BinaryMask, fraction: f64, seed: u64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boundary = boundary_pixels(mask);
    let flips = (fraction * boundary.len() as f64).round() as usize;
    let mut out = mask.clone();
    let w = mask.width();
    for k in sample(&mut rng, boundary.len(), flips.min(boundary.len())) {
        let i = boundary[k];
        out.set(i % w, i / w, !mask.get(i % w, i / w));
    }
    out
}
