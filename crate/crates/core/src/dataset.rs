//! Similarity-level pairing of image crops and warped-HR reference generation.
//!
//! Pair similarity is the number of patches that find a close match in the
//! other image's relu3_1 feature patches (cosine above `tau`, both sides
//! unit-normalized), counted in both directions and reduced with `min` so
//! the score does not depend on argument order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_pyramid, NetworkConfig};
use crate::image::{load_image, resize_bicubic, sample_bilinear, ImageBuffer};
use crate::swap::{best_rows, lr_patch_rows, sample_patches};
use crate::tensor::FeatureMap;
use crate::weights::WeightStore;

pub const DEFAULT_TAU: f64 = 0.9;
pub const CROP_SIZE: usize = 160;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCountConfig {
    pub layer: String,
    pub patch_size: usize,
    pub tau: f64,
}

impl Default for MatchCountConfig {
    fn default() -> Self {
        Self {
            layer: "relu3_1".into(),
            patch_size: 3,
            tau: DEFAULT_TAU,
        }
    }
}

/// Patches of `a` whose best cosine similarity against the patches of `b`
/// exceeds `tau`.
fn one_sided_count(a: &FeatureMap, b: &FeatureMap, patch_size: usize, tau: f64) -> Result<usize> {
    let (mut rows, _, _) = lr_patch_rows(a, patch_size)?;
    let refs = sample_patches(b, patch_size, 1)?;
    let d = refs.patch_len();
    let mut keep = Vec::with_capacity(rows.len() / d);
    for row in rows.chunks_exact_mut(d) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        keep.push(norm > 0.0);
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let (_, best) = best_rows(&rows, d, &refs);
    Ok(best
        .iter()
        .zip(&keep)
        .filter(|(&s, &k)| k && s > tau)
        .count())
}

/// Symmetric match count over already-extracted feature maps.
pub fn match_count_features(
    a: &FeatureMap,
    b: &FeatureMap,
    patch_size: usize,
    tau: f64,
) -> Result<usize> {
    for fm in [a, b] {
        if fm.height() < patch_size || fm.width() < patch_size {
            return Err(Error::ImageTooSmall {
                height: fm.height() * fm.stride(),
                width: fm.width() * fm.stride(),
                window: patch_size * fm.stride(),
            });
        }
    }
    Ok(one_sided_count(a, b, patch_size, tau)?.min(one_sided_count(b, a, patch_size, tau)?))
}

pub fn match_count(
    a: &ImageBuffer,
    b: &ImageBuffer,
    weights: &WeightStore,
    net: &NetworkConfig,
    cfg: &MatchCountConfig,
) -> Result<usize> {
    let fa = features(a, weights, net, &cfg.layer)?;
    let fb = features(b, weights, net, &cfg.layer)?;
    match_count_features(&fa, &fb, cfg.patch_size, cfg.tau)
}

fn features(img: &ImageBuffer, weights: &WeightStore, net: &NetworkConfig, layer: &str) -> Result<FeatureMap> {
    let (_, stride) = net.tap_info(layer)?;
    if img.height() < stride || img.width() < stride {
        return Err(Error::ImageTooSmall {
            height: img.height(),
            width: img.width(),
            window: stride,
        });
    }
    let img = if img.channels() != net.input_channels && img.channels() == 1 {
        img.to_rgb()
    } else {
        img.clone()
    };
    Ok(extract_pyramid(&img, weights, net, &[layer])?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    L3,
    L4,
}

/// Match-count cutoffs for L1..L4, strictly decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityLevels {
    pub thresholds: [usize; 4],
}

impl Default for SimilarityLevels {
    /// Cutoffs for 160×160 crops (1444 patch centers at relu3_1), set at the
    /// quartiles of the counts over all ordered pairs of the scikit-image
    /// sample images under `init-weights --seed 0` VGG weights.
    fn default() -> Self {
        Self {
            thresholds: [700, 260, 50, 0],
        }
    }
}

impl SimilarityLevels {
    pub fn new(thresholds: [usize; 4]) -> Result<Self> {
        if thresholds.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config(format!(
                "level cutoffs {thresholds:?} must be strictly decreasing"
            )));
        }
        Ok(Self { thresholds })
    }

    /// First level whose cutoff the count meets (`>=`); below every cutoff is L4.
    pub fn level_of(&self, count: usize) -> Level {
        const LEVELS: [Level; 4] = [Level::L1, Level::L2, Level::L3, Level::L4];
        self.thresholds
            .iter()
            .zip(LEVELS)
            .find(|(&t, _)| count >= t)
            .map_or(Level::L4, |(_, l)| l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub top: usize,
    pub left: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub source: PathBuf,
    pub reference: PathBuf,
    pub match_count: usize,
    pub level: Level,
    pub crop: CropBox,
    pub ref_crop: CropBox,
}

/// Relabels every record from its match count.
pub fn assign_levels(pool: &[PairRecord], levels: &SimilarityLevels) -> Vec<PairRecord> {
    pool.iter()
        .map(|r| PairRecord {
            level: levels.level_of(r.match_count),
            ..r.clone()
        })
        .collect()
}

fn random_crop(rng: &mut ChaCha8Rng, img: &ImageBuffer, size: usize) -> CropBox {
    CropBox {
        top: rng.random_range(0..=img.height() - size),
        left: rng.random_range(0..=img.width() - size),
        size,
    }
}

fn is_image_path(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pgm"))
}

/// Scores every ordered pair of distinct images in `dir` on seeded random
/// crops. Images smaller than the crop are skipped.
pub fn pair_directory(
    dir: &Path,
    weights: &WeightStore,
    net: &NetworkConfig,
    levels: &SimilarityLevels,
    cfg: &MatchCountConfig,
    crop_size: usize,
    seed: u64,
) -> Result<Vec<PairRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image_path(p))
        .collect();
    paths.sort();
    let mut images = Vec::new();
    for p in paths {
        let img = load_image(&p)?;
        if img.height() < crop_size || img.width() < crop_size {
            log::warn!("{}: smaller than {crop_size}x{crop_size}, skipped", p.display());
            continue;
        }
        images.push((p, img));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for (i, (src_path, src)) in images.iter().enumerate() {
        for (j, (ref_path, reference)) in images.iter().enumerate() {
            if i == j {
                continue;
            }
            let crop = random_crop(&mut rng, src, crop_size);
            let ref_crop = random_crop(&mut rng, reference, crop_size);
            let a = src.crop(crop.top, crop.left, crop_size, crop_size)?;
            let b = reference.crop(ref_crop.top, ref_crop.left, crop_size, crop_size)?;
            let count = match_count(&a, &b, weights, net, cfg)?;
            records.push(PairRecord {
                source: src_path.clone(),
                reference: ref_path.clone(),
                match_count: count,
                level: levels.level_of(count),
                crop,
                ref_crop,
            });
        }
    }
    Ok(records)
}

pub fn write_pairs_jsonl(records: &[PairRecord], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Config(e.to_string()))?;
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub fn read_pairs_jsonl(path: &Path) -> Result<Vec<PairRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
        .collect()
}

/// Random similarity transform applied to an HR image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpParams {
    /// Translation in pixels (x, y).
    pub tx: f64,
    pub ty: f64,
    /// Degrees, counter-clockwise.
    pub rotation: f64,
    /// Upscaling factor.
    pub scale: f64,
}

impl WarpParams {
    pub const IDENTITY: WarpParams = WarpParams {
        tx: 0.0,
        ty: 0.0,
        rotation: 0.0,
        scale: 1.0,
    };

    /// Translation in `[W/4, W/2] × [H/4, H/2]`, rotation in `[10°, 30°]`,
    /// scale in `[1.2, 2.0]`.
    pub fn draw(seed: u64, height: usize, width: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (width as f64, height as f64);
        WarpParams {
            tx: rng.random_range(w / 4.0..=w / 2.0),
            ty: rng.random_range(h / 4.0..=h / 2.0),
            rotation: rng.random_range(10.0..=30.0),
            scale: rng.random_range(1.2..=2.0),
        }
    }
}

pub const MIN_WARP_SIZE: usize = 160;
const MIN_INTERIOR: usize = 8;

/// Seeded warped reference of the same size as `hr`.
pub fn gen_warped_ref(hr: &ImageBuffer, seed: u64) -> Result<ImageBuffer> {
    if hr.height() < MIN_WARP_SIZE || hr.width() < MIN_WARP_SIZE {
        return Err(Error::ImageTooSmall {
            height: hr.height(),
            width: hr.width(),
            window: MIN_WARP_SIZE,
        });
    }
    warp_with(hr, &WarpParams::draw(seed, hr.height(), hr.width()))
}

/// Applies `p ↦ s·R(p − c) + c + t` about the image center `c` with bilinear
/// sampling, crops the largest rectangle whose pixels all come from inside
/// the source, and resizes that crop back to the input size.
pub fn warp_with(hr: &ImageBuffer, params: &WarpParams) -> Result<ImageBuffer> {
    let (h, w, ch) = (hr.height(), hr.width(), hr.channels());
    if !(params.scale.is_finite() && params.scale > 0.0) {
        return Err(Error::InvalidFactor(params.scale));
    }
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let (sin_t, cos_t) = params.rotation.to_radians().sin_cos();
    let mut warped = ImageBuffer::filled(h, w, ch, 0.0);
    let mut valid = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            let u = (c as f64 - cx - params.tx) / params.scale;
            let v = (r as f64 - cy - params.ty) / params.scale;
            let sx = u * cos_t - v * sin_t + cx;
            let sy = u * sin_t + v * cos_t + cy;
            if let Some(first) = sample_bilinear(hr, sy, sx, 0) {
                valid[r * w + c] = true;
                warped.set(r, c, 0, first);
                for k in 1..ch {
                    warped.set(r, c, k, sample_bilinear(hr, sy, sx, k).unwrap_or(0.0));
                }
            }
        }
    }
    let (top, left, rh, rw) = largest_valid_rect(&valid, h, w);
    if rh < MIN_INTERIOR || rw < MIN_INTERIOR {
        return Err(Error::DegenerateWarp {
            height: rh,
            width: rw,
        });
    }
    let crop = warped.crop(top, left, rh, rw)?;
    resize_bicubic(&crop, h, w)
}

/// Largest all-true axis-aligned rectangle `(top, left, height, width)`.
fn largest_valid_rect(mask: &[bool], h: usize, w: usize) -> (usize, usize, usize, usize) {
    let mut heights = vec![0usize; w];
    let mut best = (0, 0, 0, 0);
    let mut best_area = 0;
    for r in 0..h {
        for c in 0..w {
            heights[c] = if mask[r * w + c] { heights[c] + 1 } else { 0 };
        }
        let mut stack: Vec<usize> = Vec::new();
        for c in 0..=w {
            let cur = if c < w { heights[c] } else { 0 };
            while let Some(&top) = stack.last() {
                if heights[top] < cur {
                    break;
                }
                stack.pop();
                let height = heights[top];
                let left = stack.last().map_or(0, |&s| s + 1);
                let width = c - left;
                if height * width > best_area {
                    best_area = height * width;
                    best = (r + 1 - height, left, height, width);
                }
            }
            stack.push(c);
        }
    }
    best
}
