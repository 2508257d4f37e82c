//! Forward-only convolutional feature pyramid (a VGG-style stack driven by a
//! JSON layer list and weights from a [`WeightStore`]).

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::tensor::FeatureMap;
use crate::weights::{Tensor, WeightStore};

/// Name of the per-channel mean subtracted from the input image.
pub const PREPROCESS_MEAN: &str = "preprocess.mean";

/// ImageNet channel means in unit-interval scale.
pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerSpec {
    /// 3×3 (any odd size) convolution, zero "same" padding, stride 1.
    /// Weights are `{name}.kernel` and `{name}.bias`.
    Conv {
        name: String,
        channels: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tap: Option<String>,
    },
    Relu {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tap: Option<String>,
    },
    /// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
    Maxpool {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tap: Option<String>,
    },
}

impl LayerSpec {
    fn tap(&self) -> Option<&str> {
        match self {
            LayerSpec::Conv { tap, .. } | LayerSpec::Relu { tap } | LayerSpec::Maxpool { tap } => {
                tap.as_deref()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkConfig {
    /// VGG19 through `relu5_1`.
    pub fn vgg19() -> Self {
        let blocks: [(usize, usize, usize); 5] =
            [(1, 2, 64), (2, 2, 128), (3, 4, 256), (4, 4, 512), (5, 1, 512)];
        let mut layers = Vec::new();
        for (i, &(block, convs, channels)) in blocks.iter().enumerate() {
            if i > 0 {
                layers.push(LayerSpec::Maxpool { tap: None });
            }
            for k in 1..=convs {
                layers.push(LayerSpec::Conv {
                    name: format!("conv{block}_{k}"),
                    channels,
                    tap: None,
                });
                layers.push(LayerSpec::Relu {
                    tap: Some(format!("relu{block}_{k}")),
                });
            }
        }
        Self {
            input_channels: 3,
            layers,
        }
    }

    /// Checks tap uniqueness and returns `(name, in_channels, out_channels)`
    /// for every convolution.
    pub fn validate(&self) -> Result<Vec<(String, usize, usize)>> {
        let mut taps = HashSet::new();
        let mut convs = Vec::new();
        let mut channels = self.input_channels;
        if channels == 0 {
            return Err(Error::Config("network input has zero channels".into()));
        }
        for layer in &self.layers {
            if let Some(tap) = layer.tap() {
                if !taps.insert(tap.to_string()) {
                    return Err(Error::Config(format!("duplicate tap \"{tap}\"")));
                }
            }
            if let LayerSpec::Conv {
                name,
                channels: out,
                ..
            } = layer
            {
                if *out == 0 {
                    return Err(Error::Config(format!("conv {name} has zero channels")));
                }
                convs.push((name.clone(), channels, *out));
                channels = *out;
            }
        }
        Ok(convs)
    }

    /// Output channels and cumulative stride at `tap`.
    pub fn tap_info(&self, tap: &str) -> Result<(usize, usize)> {
        let mut channels = self.input_channels;
        let mut stride = 1;
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv { channels: c, .. } => channels = *c,
                LayerSpec::Maxpool { .. } => stride *= 2,
                LayerSpec::Relu { .. } => {}
            }
            if layer.tap() == Some(tap) {
                return Ok((channels, stride));
            }
        }
        Err(Error::TapNotReached(tap.to_string()))
    }

    /// Copy truncated after the layer that produces `tap`.
    pub fn through(&self, tap: &str) -> Result<NetworkConfig> {
        let end = self
            .layers
            .iter()
            .position(|l| l.tap() == Some(tap))
            .ok_or_else(|| Error::TapNotReached(tap.to_string()))?;
        Ok(NetworkConfig {
            input_channels: self.input_channels,
            layers: self.layers[..=end].to_vec(),
        })
    }
}

/// Kernel/bias lookup for a named convolution.
pub fn conv_params<'a>(weights: &'a WeightStore, name: &str) -> Result<(&'a Tensor, &'a Tensor)> {
    Ok((
        weights.require(&format!("{name}.kernel"))?,
        weights.require(&format!("{name}.bias"))?,
    ))
}

/// Cross-correlation with zero "same" padding and stride 1. Kernels are
/// `(out, in, kh, kw)` with odd spatial sizes.
pub fn conv2d_forward(input: &FeatureMap, kernel: &Tensor, bias: &Tensor) -> Result<FeatureMap> {
    let &[out_c, in_c, kh, kw] = kernel.shape() else {
        return Err(Error::Shape(format!(
            "conv kernel must be 4-D, got {:?}",
            kernel.shape()
        )));
    };
    if in_c != input.channels() {
        return Err(Error::ChannelMismatch {
            expected: in_c,
            got: input.channels(),
        });
    }
    if bias.shape() != [out_c] {
        return Err(Error::Shape(format!(
            "bias shape {:?} does not match {out_c} output channels",
            bias.shape()
        )));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::Shape(format!("kernel {kh}x{kw} must have odd size")));
    }
    let (h, w) = (input.height(), input.width());
    let hw = h * w;
    let k = in_c * kh * kw;

    let im2col;
    let cols: &[f32] = if kh == 1 && kw == 1 {
        input.data()
    } else {
        im2col = unfold(input, kh, kw);
        &im2col
    };

    let mut out = vec![0f32; out_c * hw];
    if hw > 0 {
        // Rows of the output are independent; every element is computed by
        // the same k-ordered accumulation regardless of the split.
        let rows_per_task = out_c.div_ceil(rayon::current_num_threads().max(1)).max(1);
        out.par_chunks_mut(rows_per_task * hw)
            .zip(kernel.values().par_chunks(rows_per_task * k))
            .for_each(|(dst, a)| {
                let m = dst.len() / hw;
                // SAFETY: `a` is m×k row-major, `cols` is k×hw row-major and
                // `dst` is m×hw row-major; all slices are sized accordingly.
                unsafe {
                    matrixmultiply::sgemm(
                        m,
                        k,
                        hw,
                        1.0,
                        a.as_ptr(),
                        k as isize,
                        1,
                        cols.as_ptr(),
                        hw as isize,
                        1,
                        0.0,
                        dst.as_mut_ptr(),
                        hw as isize,
                        1,
                    );
                }
            });
    }
    for (plane, &b) in out.chunks_exact_mut(hw.max(1)).zip(bias.values()) {
        if b != 0.0 {
            plane.iter_mut().for_each(|v| *v += b);
        }
    }
    FeatureMap::new(out_c, h, w, input.layer(), input.stride(), out)
}

/// `(c·kh·kw) × (h·w)` patch matrix with zero padding.
fn unfold(input: &FeatureMap, kh: usize, kw: usize) -> Vec<f32> {
    let (c, h, w) = input.shape();
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let hw = h * w;
    let mut cols = vec![0f32; c * kh * kw * hw];
    cols.par_chunks_mut(hw)
        .enumerate()
        .for_each(|(row, dst)| {
            let ch = row / (kh * kw);
            let ky = (row / kw) % kh;
            let kx = row % kw;
            let plane = input.plane(ch);
            let dy = ky as isize - ph;
            let dx = kx as isize - pw;
            for y in 0..h {
                let sy = y as isize + dy;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                let src_row = &plane[sy as usize * w..(sy as usize + 1) * w];
                let dst_row = &mut dst[y * w..(y + 1) * w];
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                for x in x0..x1 {
                    dst_row[x] = src_row[(x as isize + dx) as usize];
                }
            }
        });
    cols
}

pub fn relu_in_place(fm: &mut FeatureMap) {
    fm.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
}

/// 2×2 / stride-2 max pooling; output size is `floor(h/2) × floor(w/2)` and
/// the stride tag doubles.
pub fn maxpool2x2(fm: &FeatureMap) -> Result<FeatureMap> {
    let (c, h, w) = fm.shape();
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::Shape(format!("cannot pool a {h}x{w} map")));
    }
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let m = fm
                    .get(ch, 2 * y, 2 * x)
                    .max(fm.get(ch, 2 * y, 2 * x + 1))
                    .max(fm.get(ch, 2 * y + 1, 2 * x))
                    .max(fm.get(ch, 2 * y + 1, 2 * x + 1));
                out.push(m);
            }
        }
    }
    FeatureMap::new(c, oh, ow, fm.layer(), fm.stride() * 2, out)
}

/// Mean-subtracted, channel-major copy of an image.
pub fn image_to_features(img: &ImageBuffer, weights: &WeightStore) -> Result<FeatureMap> {
    let mean = weights.require(PREPROCESS_MEAN)?;
    if mean.values().len() != img.channels() {
        return Err(Error::ChannelMismatch {
            expected: mean.values().len(),
            got: img.channels(),
        });
    }
    let m = mean.values();
    let c = img.channels();
    let mut fm = FeatureMap::from_fn(c, img.height(), img.width(), |ch, y, x| {
        img.get(y, x, ch) - m[ch]
    });
    fm = fm.with_tag("input", 1);
    Ok(fm)
}

/// Runs the stack until the last requested tap and returns one map per tap
/// (in the order requested), each tagged with its tap name and stride.
pub fn extract_pyramid(
    img: &ImageBuffer,
    weights: &WeightStore,
    config: &NetworkConfig,
    taps: &[&str],
) -> Result<Vec<FeatureMap>> {
    config.validate()?;
    if img.channels() != config.input_channels {
        return Err(Error::ChannelMismatch {
            expected: config.input_channels,
            got: img.channels(),
        });
    }
    let last = taps
        .iter()
        .map(|t| {
            config
                .layers
                .iter()
                .position(|l| l.tap() == Some(*t))
                .ok_or_else(|| Error::TapNotReached(t.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let Some(&end) = last.iter().max() else {
        return Ok(Vec::new());
    };

    let mut found: Vec<Option<FeatureMap>> = vec![None; taps.len()];
    let mut x = image_to_features(img, weights)?;
    for layer in &config.layers[..=end] {
        x = match layer {
            LayerSpec::Conv { name, channels, .. } => {
                let (kernel, bias) = conv_params(weights, name)?;
                if kernel.shape().first() != Some(channels) {
                    return Err(Error::Shape(format!(
                        "{name}.kernel has shape {:?}, config expects {channels} outputs",
                        kernel.shape()
                    )));
                }
                conv2d_forward(&x, kernel, bias)?
            }
            LayerSpec::Relu { .. } => {
                relu_in_place(&mut x);
                x
            }
            LayerSpec::Maxpool { .. } => maxpool2x2(&x)?,
        };
        if let Some(tap) = layer.tap() {
            for (slot, t) in found.iter_mut().zip(taps) {
                if *t == tap {
                    let stride = x.stride();
                    *slot = Some(x.clone().with_tag(tap, stride));
                }
            }
        }
    }
    Ok(found.into_iter().map(|f| f.expect("tap reached")).collect())
}

/// He-uniform values for a tensor with the given fan-in.
pub(crate) fn he_uniform(rng: &mut impl Rng, fan_in: usize, n: usize) -> Vec<f32> {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt() as f32;
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Seeded He-uniform weights (zero biases) for every convolution in
/// `config`, plus the ImageNet mean for three-channel inputs.
pub fn random_network_weights(config: &NetworkConfig, seed: u64) -> Result<WeightStore> {
    use rand::SeedableRng;
    let convs = config.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::new();
    let mean = if config.input_channels == 3 {
        IMAGENET_MEAN.to_vec()
    } else {
        vec![0.45; config.input_channels]
    };
    store.insert(PREPROCESS_MEAN, vec![config.input_channels], mean)?;
    for (name, cin, cout) in convs {
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
