#![allow(dead_code)]

use ntt_core::{FeatureMap, ImageBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
    let data = (0..c * h * w).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureMap::new(c, h, w, "test", 1, data).unwrap()
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> ImageBuffer {
    let data = (0..h * w * c).map(|_| rng.random_range(0.0f32..1.0)).collect();
    ImageBuffer::new(h, w, c, data).unwrap()
}

/// Smooth synthetic scene: a few random sinusoid layers plus a disc.
pub fn scene(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageBuffer {
    let waves: Vec<[f32; 4]> = (0..4)
        .map(|_| {
            [
                rng.random_range(0.02..0.25),
                rng.random_range(0.02..0.25),
                rng.random_range(0.0..6.28),
                rng.random_range(0.1..0.3),
            ]
        })
        .collect();
    let tint: Vec<f32> = (0..3).map(|_| rng.random_range(0.6..1.0)).collect();
    let (cy, cx, r) = (
        rng.random_range(0.2..0.8) * h as f32,
        rng.random_range(0.2..0.8) * w as f32,
        rng.random_range(0.1..0.3) * h.min(w) as f32,
    );
    ImageBuffer::from_fn(h, w, 3, |y, x, c| {
        let (yf, xf) = (y as f32, x as f32);
        let mut v = 0.5;
        for [fy, fx, ph, a] in &waves {
            v += a * (fy * yf + fx * xf + ph + c as f32 * 0.7).sin() * 0.5;
        }
        if (yf - cy).powi(2) + (xf - cx).powi(2) < r * r {
            v = 1.0 - v;
        }
        (v * tint[c]).clamp(0.0, 1.0)
    })
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}
