//! Reconstruction, perceptual and weighted Gram texture losses, the weighted
//! objective, and PSNR/SSIM. All reductions accumulate in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_pyramid, NetworkConfig};
use crate::image::ImageBuffer;
use crate::swap::SwappedPyramid;
use crate::tensor::FeatureMap;
use crate::weights::WeightStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_rec: f64,
    pub w_per: f64,
    pub w_adv: f64,
    pub w_tex: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_rec: 1.0,
            w_per: 1e-4,
            w_adv: 1e-6,
            w_tex: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureLossConfig {
    pub layers: Vec<String>,
}

impl Default for TextureLossConfig {
    fn default() -> Self {
        Self {
            layers: vec!["relu1_1".into(), "relu2_1".into(), "relu3_1".into()],
        }
    }
}

/// Per-layer normalization `1 / (4 · C² · (H·W)²)`.
pub fn texture_lambda(channels: usize, height: usize, width: usize) -> f64 {
    let c = channels as f64;
    let n = (height * width) as f64;
    1.0 / (4.0 * c * c * n * n)
}

fn check_same(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "images differ: {}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn rec_loss(sr: &ImageBuffer, hr: &ImageBuffer) -> Result<f64> {
    check_same(sr, hr)?;
    let sum: f64 = sr
        .data()
        .iter()
        .zip(hr.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / sr.data().len() as f64)
}

pub const PERCEPTUAL_LAYER: &str = "relu5_1";

/// `(1/V) Σ_i ‖φ_i(hr) − φ_i(sr)‖_F` over the channels of `relu5_1`,
/// `V = C·H·W`.
pub fn perceptual_loss(
    sr: &ImageBuffer,
    hr: &ImageBuffer,
    weights: &WeightStore,
    net: &NetworkConfig,
) -> Result<f64> {
    check_same(sr, hr)?;
    let a = &extract_pyramid(sr, weights, net, &[PERCEPTUAL_LAYER])?[0];
    let b = &extract_pyramid(hr, weights, net, &[PERCEPTUAL_LAYER])?[0];
    Ok(perceptual_distance(a, b))
}

/// The perceptual reduction over two already-extracted maps of equal shape.
pub fn perceptual_distance(a: &FeatureMap, b: &FeatureMap) -> f64 {
    let (c, h, w) = a.shape();
    let total: f64 = (0..c)
        .map(|ch| {
            a.plane(ch)
                .iter()
                .zip(b.plane(ch))
                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    total / (c * h * w).max(1) as f64
}

/// Unnormalized Gram matrix `G[a][b] = Σ_{y,x} f(a,y,x)·f(b,y,x)`, row-major `C×C`.
pub fn gram_matrix(fm: &FeatureMap) -> Result<Vec<f64>> {
    let (c, h, w) = fm.shape();
    if c == 0 || h * w == 0 {
        return Err(Error::Empty("feature map"));
    }
    let planes: Vec<Vec<f64>> = (0..c)
        .map(|ch| fm.plane(ch).iter().map(|&v| v as f64).collect())
        .collect();
    let mut g = vec![0f64; c * c];
    for a in 0..c {
        for b in a..c {
            let s: f64 = planes[a].iter().zip(&planes[b]).map(|(x, y)| x * y).sum();
            g[a * c + b] = s;
            g[b * c + a] = s;
        }
    }
    Ok(g)
}

/// `Σ_l λ_l ‖Gr(φ_l(I_SR)·S*_l) − Gr(M_l·S*_l)‖_F`.
pub fn texture_loss(
    sr_features: &[FeatureMap],
    pyramid: &SwappedPyramid,
    cfg: &TextureLossConfig,
) -> Result<f64> {
    if sr_features.len() != cfg.layers.len() {
        return Err(Error::Config(format!(
            "{} texture layers configured, {} feature maps supplied",
            cfg.layers.len(),
            sr_features.len()
        )));
    }
    let mut total = 0.0;
    for name in &cfg.layers {
        let fm = sr_features
            .iter()
            .find(|f| f.layer() == name)
            .ok_or_else(|| Error::Config(format!("no SR features for layer {name}")))?;
        let swapped = pyramid
            .layer(name)
            .ok_or_else(|| Error::Config(format!("pyramid has no layer {name}")))?;
        if fm.shape() != swapped.swapped.shape() {
            return Err(Error::Shape(format!(
                "layer {name}: SR features {:?} vs swapped map {:?}",
                fm.shape(),
                swapped.swapped.shape()
            )));
        }
        let g_sr = gram_matrix(&fm.scale_by_map(&swapped.weight)?)?;
        let g_m = gram_matrix(&swapped.swapped.scale_by_map(&swapped.weight)?)?;
        let frob = g_sr
            .iter()
            .zip(&g_m)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let (c, h, w) = fm.shape();
        total += texture_lambda(c, h, w) * frob;
    }
    Ok(total)
}

/// Loss components; `adv` is supplied externally (zero when absent).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub rec: f64,
    pub per: f64,
    pub tex: f64,
    pub adv: Option<f64>,
}

pub fn total_objective(parts: &LossParts, w: &LossWeights) -> Result<f64> {
    for (name, v) in [
        ("w_rec", w.w_rec),
        ("w_per", w.w_per),
        ("w_adv", w.w_adv),
        ("w_tex", w.w_tex),
    ] {
        if !(v >= 0.0) {
            return Err(Error::Config(format!("loss weight {name} = {v} is negative")));
        }
    }
    Ok(w.w_rec * parts.rec
        + w.w_per * parts.per
        + w.w_adv * parts.adv.unwrap_or(0.0)
        + w.w_tex * parts.tex)
}

/// `10·log10(1 / MSE)`; identical images give `+inf`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same(a, b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" Gaussian filtering of a row-major plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut horiz = vec![0f64; h * ow];
    for y in 0..h {
        for x in 0..ow {
            horiz[y * ow + x] = (0..k).map(|i| g[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0f64; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| g[i] * horiz[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Single-scale SSIM on luma: 11×11 Gaussian window (σ = 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over all fully interior windows.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same(a, b)?;
    if a.height() < SSIM_WINDOW || a.width() < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            height: a.height(),
            width: a.width(),
            window: SSIM_WINDOW,
        });
    }
    let (h, w) = (a.height(), a.width());
    let x: Vec<f64> = a.to_luma().data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.to_luma().data().iter().map(|&v| v as f64).collect();
    let g = gaussian_window();
    let mu_x = filter_valid(&x, h, w, &g);
    let mu_y = filter_valid(&y, h, w, &g);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let s_xx = filter_valid(&xx, h, w, &g);
    let s_yy = filter_valid(&yy, h, w, &g);
    let s_xy = filter_valid(&xy, h, w, &g);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mu_x.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = s_xx[i] - mx * mx;
        let vy = s_yy[i] - my * my;
        let cov = s_xy[i] - mx * my;
        sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(sum / n as f64)
}
