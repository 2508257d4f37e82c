//! Feature swapping: match LR patches against reference patches in feature
//! space and rebuild the LR feature maps out of the matched reference
//! features.
//!
//! Matching happens once, on the frequency-matched (down/up-sampled)
//! reference at the coarsest layer. The correspondence is then projected to
//! the finer layers, where patches are cut from the *raw* reference so the
//! high-frequency content survives. Both patch sets are sampled on the same
//! grid, so a matched index addresses the same reference location in each.

mod assemble;
mod augment;
mod matching;
mod patches;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use assemble::{assemble_swap_map, score_map};
pub use augment::{augment_references, augment_references_tagged, RefVariant};
pub use matching::{
    best_match, correlation_maps, match_patches, project_correspondence, CorrespondenceMap,
    ScoreVolume, REF_CHUNK,
};
pub use patches::{grid_len, sample_patches, PatchGrid, PatchPos};

pub(crate) use matching::{best_rows, lr_patch_rows};

use crate::error::{Error, Result};
use crate::features::{extract_pyramid, NetworkConfig};
use crate::image::{bicubic_resample, degrade_ref, ImageBuffer};
use crate::tensor::FeatureMap;
use crate::weights::{load_weights, store_weights, WeightStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub scales: Vec<f64>,
    /// Degrees, counter-clockwise.
    pub rotations: Vec<f64>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            scales: vec![1.0],
            rotations: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwapConfig {
    /// Layer on which patches are matched.
    pub match_layer: String,
    /// Layers that receive a swapped map; the correspondence is projected to each.
    pub target_layers: Vec<String>,
    /// Patch side at the match layer.
    pub patch_size: usize,
    /// Reference-side sampling step at the match layer (LR patches are always dense).
    pub stride: usize,
    /// Super-resolution factor used for LR↑ and the reference down/up pass.
    pub sr_factor: u32,
    pub augment: AugmentConfig,
}

impl Default for SwapConfig {
    fn default() -> Self {
        Self {
            match_layer: "relu3_1".into(),
            target_layers: vec!["relu3_1".into(), "relu2_1".into(), "relu1_1".into()],
            patch_size: 3,
            stride: 1,
            sr_factor: 4,
            augment: AugmentConfig::default(),
        }
    }
}

/// Swapped map `M_l`, weight map `S*_l` and the coverage count for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SwappedLayer {
    pub swapped: FeatureMap,
    /// One channel, same spatial size as `swapped`.
    pub weight: FeatureMap,
    /// Patches covering each cell; absent when loaded from a file.
    pub coverage: Option<Vec<u32>>,
}

impl SwappedLayer {
    pub fn layer(&self) -> &str {
        self.swapped.layer()
    }

    pub fn mean_weight(&self) -> f64 {
        let d = self.weight.data();
        d.iter().map(|&v| v as f64).sum::<f64>() / d.len().max(1) as f64
    }
}

/// Provenance of a slice of the global reference patch index space.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantInfo {
    pub ref_index: usize,
    pub scale: f64,
    pub rotation: f64,
    /// First global patch index belonging to this variant.
    pub first_patch: usize,
    pub patches: usize,
}

/// Per-layer swapped maps ordered coarse to fine.
#[derive(Debug, Clone, PartialEq)]
pub struct SwappedPyramid {
    layers: Vec<SwappedLayer>,
    correspondence: Option<CorrespondenceMap>,
    variants: Vec<VariantInfo>,
}

impl SwappedPyramid {
    pub fn new(mut layers: Vec<SwappedLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("swapped pyramid"));
        }
        let mut seen = HashSet::new();
        for l in &layers {
            if !seen.insert(l.layer().to_string()) {
                return Err(Error::Config(format!("layer {} appears twice", l.layer())));
            }
            let (_, h, w) = l.swapped.shape();
            if l.weight.shape() != (1, h, w) {
                return Err(Error::Shape(format!(
                    "weight map {:?} does not match swapped map {:?} at {}",
                    l.weight.shape(),
                    l.swapped.shape(),
                    l.layer()
                )));
            }
        }
        layers.sort_by(|a, b| b.swapped.stride().cmp(&a.swapped.stride()));
        Ok(Self {
            layers,
            correspondence: None,
            variants: Vec::new(),
        })
    }

    pub fn layers(&self) -> &[SwappedLayer] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&SwappedLayer> {
        self.layers.iter().find(|l| l.layer() == name)
    }

    /// Correspondence at the match layer, when built by [`swap_pipeline`].
    pub fn correspondence(&self) -> Option<&CorrespondenceMap> {
        self.correspondence.as_ref()
    }

    pub fn variants(&self) -> &[VariantInfo] {
        &self.variants
    }

    /// Splits a global reference patch index into
    /// `(reference, variant, patch within variant)`.
    pub fn locate(&self, j: usize) -> Option<(usize, usize, usize)> {
        self.variants
            .iter()
            .enumerate()
            .find(|(_, v)| j >= v.first_patch && j < v.first_patch + v.patches)
            .map(|(vi, v)| (v.ref_index, vi, j - v.first_patch))
    }

    /// Tensors `M.<layer>` `(C, H, W)` and `S.<layer>` `(H, W)`.
    pub fn to_weight_store(&self) -> Result<WeightStore> {
        let mut store = WeightStore::new();
        for l in &self.layers {
            let (c, h, w) = l.swapped.shape();
            store.insert(
                format!("M.{}", l.layer()),
                vec![c, h, w],
                l.swapped.data().to_vec(),
            )?;
            store.insert(format!("S.{}", l.layer()), vec![h, w], l.weight.data().to_vec())?;
        }
        Ok(store)
    }

    /// Inverse of [`Self::to_weight_store`]. Strides are recovered relative to
    /// the finest layer.
    pub fn from_weight_store(store: &WeightStore) -> Result<Self> {
        let mut raw = Vec::new();
        for (name, t) in store.iter() {
            let Some(layer) = name.strip_prefix("M.") else {
                continue;
            };
            let &[c, h, w] = t.shape() else {
                return Err(Error::Shape(format!("{name} must be 3-D, got {:?}", t.shape())));
            };
            let s = store.require(&format!("S.{layer}"))?;
            if s.shape() != [h, w] {
                return Err(Error::Shape(format!(
                    "S.{layer} has shape {:?}, expected [{h}, {w}]",
                    s.shape()
                )));
            }
            raw.push((layer.to_string(), c, h, w, t.values().to_vec(), s.values().to_vec()));
        }
        let finest = raw
            .iter()
            .map(|r| r.2)
            .max()
            .ok_or(Error::Empty("swapped pyramid"))?;
        let layers = raw
            .into_iter()
            .map(|(layer, c, h, w, m, s)| {
                let stride = (finest as f64 / h as f64).round().max(1.0) as usize;
                Ok(SwappedLayer {
                    swapped: FeatureMap::new(c, h, w, layer.clone(), stride, m)?,
                    weight: FeatureMap::new(1, h, w, layer, stride, s)?,
                    coverage: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        store_weights(&self.to_weight_store()?, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_weight_store(&load_weights(path)?)
    }
}

fn with_channels(img: &ImageBuffer, channels: usize) -> ImageBuffer {
    match (img.channels(), channels) {
        (1, 3) => img.to_rgb(),
        (3, 1) => img.to_luma(),
        _ => img.clone(),
    }
}

/// Full swapping stage: LR↑ and per-reference Ref↓↑ construction, feature
/// extraction, matching on `cfg.match_layer` over the union of all augmented
/// references, projection, and assembly of `M_l` / `S*_l` for every target
/// layer.
pub fn swap_pipeline(
    lr: &ImageBuffer,
    refs: &[ImageBuffer],
    weights: &WeightStore,
    net: &NetworkConfig,
    cfg: &SwapConfig,
) -> Result<SwappedPyramid> {
    if refs.is_empty() {
        return Err(Error::Empty("reference list"));
    }
    if cfg.target_layers.is_empty() {
        return Err(Error::Config("no target layers".into()));
    }
    let (_, match_stride) = net.tap_info(&cfg.match_layer)?;
    let mut target_strides = Vec::with_capacity(cfg.target_layers.len());
    for t in &cfg.target_layers {
        let (_, s) = net.tap_info(t)?;
        if s == 0 || match_stride % s != 0 {
            return Err(Error::StrideNotDivisible {
                from: match_stride,
                to: s,
            });
        }
        target_strides.push(s);
    }
    let ps = cfg.patch_size;
    let factor = cfg.sr_factor;

    let lr = with_channels(lr, net.input_channels);
    let lr_up = bicubic_resample(&lr, factor as f64)?;
    let mut lr_taps: Vec<&str> = cfg.target_layers.iter().map(String::as_str).collect();
    lr_taps.push(&cfg.match_layer);
    let lr_feats = extract_pyramid(&lr_up, weights, net, &lr_taps)?;
    let lr_match = lr_feats.last().expect("match layer features");

    let refs: Vec<ImageBuffer> = refs
        .iter()
        .map(|r| with_channels(r, net.input_channels))
        .collect();
    let variants = augment_references_tagged(&refs, &cfg.augment.scales, &cfg.augment.rotations)?;

    let target_taps: Vec<&str> = cfg.target_layers.iter().map(String::as_str).collect();
    let mut match_grids = Vec::with_capacity(variants.len());
    let mut hr_grids: Vec<Vec<PatchGrid>> = vec![Vec::new(); target_taps.len()];
    let mut infos = Vec::with_capacity(variants.len());
    let mut first_patch = 0;
    for v in &variants {
        let img = &v.image;
        let min_side = (match_stride * ps).max(factor as usize);
        if img.height() < min_side || img.width() < min_side {
            return Err(Error::ReferenceTooSmall { index: v.ref_index });
        }
        let degraded = degrade_ref(img, factor)?;
        let matched = extract_pyramid(&degraded, weights, net, &[cfg.match_layer.as_str()])?;
        let grid = sample_patches(&matched[0], ps, cfg.stride).map_err(|e| match e {
            Error::PatchTooLarge { .. } => Error::ReferenceTooSmall { index: v.ref_index },
            other => other,
        })?;
        let raw = extract_pyramid(img, weights, net, &target_taps)?;
        for ((fm, &stride), slot) in raw.iter().zip(&target_strides).zip(&mut hr_grids) {
            let f = match_stride / stride;
            let g = sample_patches(fm, ps * f, cfg.stride * f)?;
            if g.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "{} patch grid has {} patches but the match grid has {}",
                    fm.layer(),
                    g.len(),
                    grid.len()
                )));
            }
            slot.push(g);
        }
        infos.push(VariantInfo {
            ref_index: v.ref_index,
            scale: v.scale,
            rotation: v.rotation,
            first_patch,
            patches: grid.len(),
        });
        first_patch += grid.len();
        match_grids.push(grid);
    }
    drop(variants);

    let bank = PatchGrid::concat(match_grids)?;
    let corr = match_patches(lr_match, &bank)?;
    log::debug!(
        "matched {} LR patches against {} reference patches at {}",
        corr.len(),
        bank.len(),
        cfg.match_layer
    );

    let mut layers = Vec::with_capacity(target_taps.len());
    for ((grids, fm), &stride) in hr_grids.into_iter().zip(&lr_feats).zip(&target_strides) {
        let projected = project_correspondence(&corr, match_stride, stride)?;
        let hr_bank = PatchGrid::concat(grids)?;
        let (m, coverage) = assemble_swap_map(&projected, &hr_bank, fm.shape())?;
        let s = score_map(&projected, fm.height(), fm.width())?;
        layers.push(SwappedLayer {
            swapped: m.with_tag(fm.layer(), stride),
            weight: s.with_tag(fm.layer(), stride),
            coverage: Some(coverage),
        });
    }
    let mut pyramid = SwappedPyramid::new(layers)?;
    pyramid.correspondence = Some(corr);
    pyramid.variants = infos;
    Ok(pyramid)
}
