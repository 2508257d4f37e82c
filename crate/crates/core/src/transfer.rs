//! Texture-transfer generator (forward pass only).
//!
//! ```text
//! ψ0      = relu(entry2(relu(entry1(I_LR))))
//! ψl      = up2x( Res_l(ψl-1 ‖ Ml-1) + ψl-1 )      l = 1 .. L-1
//! trunk   =       Res_L(ψL-1 ‖ ML-1) + ψL-1
//! I_SR    = output(trunk)
//! Res_l(x) = tail(blocks(relu(merge(x))))
//! up2x(x)  = pixel_shuffle(up(x), 2)
//! ```
//!
//! All parameters are read from a [`WeightStore`] under the `gen.` prefix.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{conv2d_forward, conv_params, he_uniform, relu_in_place};
use crate::image::ImageBuffer;
use crate::swap::SwappedPyramid;
use crate::tensor::FeatureMap;
use crate::weights::WeightStore;

pub const GEN_PREFIX: &str = "gen.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    /// Number of merge levels `L`; the output is `2^(L-1)` times the LR size.
    pub levels: usize,
    pub residual_blocks: usize,
    pub trunk_channels: usize,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            residual_blocks: 16,
            trunk_channels: 64,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("transfer network needs at least one level".into()));
        }
        if self.trunk_channels == 0 {
            return Err(Error::Config("trunk channels must be positive".into()));
        }
        Ok(())
    }

    /// Total upscale from LR to output.
    pub fn upscale(&self) -> usize {
        1 << (self.levels - 1)
    }

    /// Every convolution as `(name, in_channels, out_channels)`, given the
    /// channel count of each swapped map (coarse to fine).
    pub fn conv_layout(&self, swapped_channels: &[usize]) -> Result<Vec<(String, usize, usize)>> {
        self.validate()?;
        if swapped_channels.len() != self.levels {
            return Err(Error::Config(format!(
                "{} levels configured but {} swapped maps supplied",
                self.levels,
                swapped_channels.len()
            )));
        }
        let c = self.trunk_channels;
        let mut out = vec![
            ("gen.entry1".to_string(), 3, c),
            ("gen.entry2".to_string(), c, c),
        ];
        for (l, &m) in swapped_channels.iter().enumerate() {
            out.push((format!("gen.level{l}.merge"), c + m, c));
            for b in 0..self.residual_blocks {
                out.push((format!("gen.level{l}.block{b}.conv1"), c, c));
                out.push((format!("gen.level{l}.block{b}.conv2"), c, c));
            }
            out.push((format!("gen.level{l}.tail"), c, c));
            if l + 1 < self.levels {
                out.push((format!("gen.level{l}.up"), c, 4 * c));
            }
        }
        out.push(("gen.output".to_string(), c, 3));
        Ok(out)
    }
}

/// Seeded He-uniform generator weights with zero biases.
pub fn random_generator_weights(
    cfg: &TransferConfig,
    swapped_channels: &[usize],
    seed: u64,
) -> Result<WeightStore> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::new();
    for (name, cin, cout) in cfg.conv_layout(swapped_channels)? {
        let fan_in = cin * 9;
        store.insert(
            format!("{name}.kernel"),
            vec![cout, cin, 3, 3],
            he_uniform(&mut rng, fan_in, cout * fan_in),
        )?;
        store.insert(format!("{name}.bias"), vec![cout], vec![0.0; cout])?;
    }
    Ok(store)
}

/// True when the store carries any generator parameters.
pub fn has_generator_weights(weights: &WeightStore) -> bool {
    weights.names().any(|n| n.starts_with(GEN_PREFIX))
}

fn conv(x: &FeatureMap, weights: &WeightStore, name: &str) -> Result<FeatureMap> {
    let (k, b) = conv_params(weights, name)?;
    conv2d_forward(x, k, b)
}

/// `x + conv2(relu(conv1(x)))` with weights `{name}.conv1` / `{name}.conv2`.
pub fn residual_block_forward(x: &FeatureMap, weights: &WeightStore, name: &str) -> Result<FeatureMap> {
    let mut h = conv(x, weights, &format!("{name}.conv1"))?;
    relu_in_place(&mut h);
    let h = conv(&h, weights, &format!("{name}.conv2"))?;
    if h.shape() != x.shape() {
        return Err(Error::Shape(format!(
            "residual block {name} maps {:?} to {:?}",
            x.shape(),
            h.shape()
        )));
    }
    x.add(&h)
}

/// Channel-to-space rearrangement:
/// `out(c, y, x) = in(c·r² + (y mod r)·r + (x mod r), y / r, x / r)`.
pub fn subpixel_upscale(x: &FeatureMap, r: usize) -> Result<FeatureMap> {
    let (c, h, w) = x.shape();
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::Shape(format!(
            "{c} channels are not divisible by {r}² for sub-pixel upscaling"
        )));
    }
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![0f32; oc * oh * ow];
    for ch in 0..oc {
        for y in 0..oh {
            for xo in 0..ow {
                let src = ch * r * r + (y % r) * r + (xo % r);
                out[(ch * oh + y) * ow + xo] = x.get(src, y / r, xo / r);
            }
        }
    }
    let stride = (x.stride() / r).max(1);
    FeatureMap::new(oc, oh, ow, x.layer(), stride, out)
}

/// Content features `ψ0` computed from the LR image at its own resolution.
pub fn content_stem(lr: &ImageBuffer, weights: &WeightStore) -> Result<FeatureMap> {
    let lr = if lr.channels() == 1 { lr.to_rgb() } else { lr.clone() };
    let x = FeatureMap::from_fn(3, lr.height(), lr.width(), |c, y, xx| lr.get(y, xx, c));
    let mut h = conv(&x, weights, "gen.entry1")?;
    relu_in_place(&mut h);
    let mut h = conv(&h, weights, "gen.entry2")?;
    relu_in_place(&mut h);
    Ok(h)
}

/// `Res_l(x) = tail(blocks(relu(merge(x))))`.
pub fn res_branch(
    x: &FeatureMap,
    weights: &WeightStore,
    level: usize,
    cfg: &TransferConfig,
) -> Result<FeatureMap> {
    let mut h = conv(x, weights, &format!("gen.level{level}.merge"))?;
    relu_in_place(&mut h);
    for b in 0..cfg.residual_blocks {
        h = residual_block_forward(&h, weights, &format!("gen.level{level}.block{b}"))?;
    }
    conv(&h, weights, &format!("gen.level{level}.tail"))
}

/// Channel-major 3-channel map to an image, clamped to the unit interval.
pub fn features_to_image(fm: &FeatureMap) -> Result<ImageBuffer> {
    if fm.channels() != 3 && fm.channels() != 1 {
        return Err(Error::Shape(format!(
            "cannot convert {} channels to an image",
            fm.channels()
        )));
    }
    Ok(ImageBuffer::from_fn(fm.height(), fm.width(), fm.channels(), |y, x, c| {
        fm.get(c, y, x).clamp(0.0, 1.0)
    }))
}

/// Runs the merge/upscale recursion over the pyramid (coarse to fine) and
/// the output convolution.
pub fn transfer_forward(
    content_base: &FeatureMap,
    pyramid: &SwappedPyramid,
    weights: &WeightStore,
    cfg: &TransferConfig,
) -> Result<ImageBuffer> {
    cfg.validate()?;
    let layers = pyramid.layers();
    if layers.len() != cfg.levels {
        return Err(Error::Config(format!(
            "{} transfer levels but the pyramid has {} layers",
            cfg.levels,
            layers.len()
        )));
    }
    let mut psi = content_base.clone();
    for (l, layer) in layers.iter().enumerate() {
        let m = &layer.swapped;
        if (m.height(), m.width()) != (psi.height(), psi.width()) {
            return Err(Error::Shape(format!(
                "level {l}: swapped map {} is {}x{} but content is {}x{}",
                layer.layer(),
                m.height(),
                m.width(),
                psi.height(),
                psi.width()
            )));
        }
        let merged = psi.concat(m)?;
        let r = res_branch(&merged, weights, l, cfg)?;
        psi = r.add(&psi)?;
        if l + 1 < cfg.levels {
            let up = conv(&psi, weights, &format!("gen.level{l}.up"))?;
            psi = subpixel_upscale(&up, 2)?;
        }
    }
    let out = conv(&psi, weights, "gen.output")?;
    features_to_image(&out)
}

/// `content_stem` followed by `transfer_forward`.
pub fn super_resolve(
    lr: &ImageBuffer,
    pyramid: &SwappedPyramid,
    weights: &WeightStore,
    cfg: &TransferConfig,
) -> Result<ImageBuffer> {
    let psi0 = content_stem(lr, weights)?;
    transfer_forward(&psi0, pyramid, weights, cfg)
}
