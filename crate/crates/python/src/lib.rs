//! Python module `ntt`: images, feature maps, weight stores, the swapping
//! stage, the transfer generator and the evaluation metrics.
//!
//! Pixel and feature data cross the boundary as flat row-major float lists
//! plus a shape, so any sequence of numbers (including a flattened numpy
//! array) is accepted.

use std::path::PathBuf;

use ntt_core::dataset::{gen_warped_ref, match_count, MatchCountConfig};
use ntt_core::features::random_network_weights;
use ntt_core::losses::{psnr, rec_loss, ssim, texture_loss, TextureLossConfig};
use ntt_core::swap::{match_patches, sample_patches};
use ntt_core::transfer::{has_generator_weights, random_generator_weights, super_resolve};
use ntt_core::{
    bicubic_resample, extract_pyramid, load_image, load_weights, save_image, store_weights,
    Error, ErrorKind, FeatureMap, ImageBuffer, NetworkConfig, SwapConfig, SwappedPyramid,
    TransferConfig, WeightStore,
};
use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Io => PyIOError::new_err(e.to_string()),
        ErrorKind::Invalid => PyValueError::new_err(e.to_string()),
    }
}

fn from_json<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(T::default()),
    }
}

fn network(json: Option<&str>) -> PyResult<NetworkConfig> {
    match json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(NetworkConfig::vgg19()),
    }
}

/// Float image, height × width × channels, interleaved, nominally in [0, 1].
#[pyclass(name = "Image", module = "ntt", from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: ImageBuffer,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> PyResult<Self> {
        let inner = ImageBuffer::new(height, width, channels, data).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_image(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_image(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.height(), self.inner.width(), self.inner.channels())
    }

    fn to_list(&self) -> Vec<f32> {
        self.inner.data().to_vec()
    }

    /// Bicubic resampling by `factor` (0.25 downsamples by 4).
    fn resize(&self, factor: f64) -> PyResult<Self> {
        Ok(Self {
            inner: bicubic_resample(&self.inner, factor).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        let (h, w, c) = self.shape();
        format!("Image(height={h}, width={w}, channels={c})")
    }
}

/// Channel-major feature map tagged with its layer name and stride.
#[pyclass(name = "FeatureMap", module = "ntt", from_py_object)]
#[derive(Clone)]
struct PyFeatureMap {
    inner: FeatureMap,
}

#[pymethods]
impl PyFeatureMap {
    #[new]
    #[pyo3(signature = (channels, height, width, data, layer = "input", stride = 1))]
    fn new(channels: usize, height: usize, width: usize, data: Vec<f32>, layer: &str, stride: usize) -> PyResult<Self> {
        let inner = FeatureMap::new(channels, height, width, layer, stride, data).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.inner.shape()
    }

    #[getter]
    fn layer(&self) -> String {
        self.inner.layer().to_string()
    }

    #[getter]
    fn stride(&self) -> usize {
        self.inner.stride()
    }

    fn to_list(&self) -> Vec<f32> {
        self.inner.data().to_vec()
    }

    fn __repr__(&self) -> String {
        let (c, h, w) = self.inner.shape();
        format!("FeatureMap(layer={:?}, channels={c}, height={h}, width={w})", self.inner.layer())
    }
}

/// Named tensors, stored on disk in the NTTW container.
#[pyclass(name = "WeightStore", module = "ntt", skip_from_py_object)]
#[derive(Clone, Default)]
struct PyWeightStore {
    inner: WeightStore,
}

#[pymethods]
impl PyWeightStore {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_weights(path).map_err(py_err)?,
        })
    }

    /// Seeded He-uniform VGG19 weights up to and including `through`.
    #[staticmethod]
    #[pyo3(signature = (through = "relu5_1", seed = 0))]
    fn random_vgg(through: &str, seed: u64) -> PyResult<Self> {
        let net = NetworkConfig::vgg19().through(through).map_err(py_err)?;
        Ok(Self {
            inner: random_network_weights(&net, seed).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        store_weights(&self.inner, path).map_err(py_err)
    }

    fn names(&self) -> Vec<String> {
        self.inner.names().map(str::to_string).collect()
    }

    fn insert(&mut self, name: String, shape: Vec<usize>, values: Vec<f32>) -> PyResult<()> {
        self.inner.insert(name, shape, values).map_err(py_err)
    }

    /// `(shape, values)` of the named tensor.
    fn get(&self, name: &str) -> PyResult<(Vec<usize>, Vec<f32>)> {
        let t = self
            .inner
            .get(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        Ok((t.shape().to_vec(), t.values().to_vec()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, name: &str) -> bool {
        self.inner.contains(name)
    }
}

/// Swapped feature maps `M` and weight maps `S*`, coarse to fine.
#[pyclass(name = "SwappedPyramid", module = "ntt", skip_from_py_object)]
#[derive(Clone)]
struct PySwappedPyramid {
    inner: SwappedPyramid,
}

impl PySwappedPyramid {
    fn layer(&self, name: &str) -> PyResult<&ntt_core::swap::SwappedLayer> {
        self.inner
            .layer(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }
}

#[pymethods]
impl PySwappedPyramid {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: SwappedPyramid::load(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    fn layers(&self) -> Vec<String> {
        self.inner.layers().iter().map(|l| l.layer().to_string()).collect()
    }

    fn swapped(&self, layer: &str) -> PyResult<PyFeatureMap> {
        Ok(PyFeatureMap {
            inner: self.layer(layer)?.swapped.clone(),
        })
    }

    fn weight(&self, layer: &str) -> PyResult<PyFeatureMap> {
        Ok(PyFeatureMap {
            inner: self.layer(layer)?.weight.clone(),
        })
    }

    fn mean_weight(&self, layer: &str) -> PyResult<f64> {
        Ok(self.layer(layer)?.mean_weight())
    }

    /// Best reference patch index per LR patch, if the pyramid was built in
    /// this session.
    fn best_indices(&self) -> Option<Vec<usize>> {
        self.inner.correspondence().map(|c| c.best_index().to_vec())
    }
}

/// Features of `image` at each tap in `layers`.
#[pyfunction]
#[pyo3(signature = (image, weights, layers, network_json = None))]
fn extract_features(
    image: &PyImage,
    weights: &PyWeightStore,
    layers: Vec<String>,
    network_json: Option<&str>,
) -> PyResult<Vec<PyFeatureMap>> {
    let net = network(network_json)?;
    let taps: Vec<&str> = layers.iter().map(String::as_str).collect();
    let maps = extract_pyramid(&image.inner, &weights.inner, &net, &taps).map_err(py_err)?;
    Ok(maps.into_iter().map(|inner| PyFeatureMap { inner }).collect())
}

/// Dense matching of every LR patch against the reference patches sampled
/// at `stride`. Returns `(grid_height, grid_width, indices, scores)`.
#[pyfunction]
#[pyo3(signature = (lr, reference, patch_size = 3, stride = 1))]
fn match_features(
    lr: &PyFeatureMap,
    reference: &PyFeatureMap,
    patch_size: usize,
    stride: usize,
) -> PyResult<(usize, usize, Vec<usize>, Vec<f64>)> {
    let grid = sample_patches(&reference.inner, patch_size, stride).map_err(py_err)?;
    let corr = match_patches(&lr.inner, &grid).map_err(py_err)?;
    let (gh, gw) = corr.grid();
    Ok((gh, gw, corr.best_index().to_vec(), corr.best_score().to_vec()))
}

/// Full swapping stage. With no references the bicubically upscaled LR
/// image serves as its own reference.
#[pyfunction]
#[pyo3(signature = (lr, refs, weights, config_json = None, network_json = None))]
fn swap(
    lr: &PyImage,
    refs: Vec<PyImage>,
    weights: &PyWeightStore,
    config_json: Option<&str>,
    network_json: Option<&str>,
) -> PyResult<PySwappedPyramid> {
    let cfg: SwapConfig = from_json(config_json)?;
    let net = network(network_json)?;
    let refs: Vec<ImageBuffer> = if refs.is_empty() {
        vec![bicubic_resample(&lr.inner, cfg.sr_factor as f64).map_err(py_err)?]
    } else {
        refs.into_iter().map(|r| r.inner).collect()
    };
    let inner = ntt_core::swap_pipeline(&lr.inner, &refs, &weights.inner, &net, &cfg).map_err(py_err)?;
    Ok(PySwappedPyramid { inner })
}

/// Generator forward pass. Missing generator weights are drawn from `seed`.
#[pyfunction]
#[pyo3(signature = (lr, pyramid, weights = None, config_json = None, seed = 0))]
fn transfer(
    lr: &PyImage,
    pyramid: &PySwappedPyramid,
    weights: Option<&PyWeightStore>,
    config_json: Option<&str>,
    seed: u64,
) -> PyResult<PyImage> {
    let cfg: TransferConfig = from_json(config_json)?;
    let mut store = weights.map(|w| w.inner.clone()).unwrap_or_default();
    if !has_generator_weights(&store) {
        let channels: Vec<usize> = pyramid.inner.layers().iter().map(|l| l.swapped.channels()).collect();
        store.extend(random_generator_weights(&cfg, &channels, seed).map_err(py_err)?);
    }
    let inner = super_resolve(&lr.inner, &pyramid.inner, &store, &cfg).map_err(py_err)?;
    Ok(PyImage { inner })
}

#[pyfunction(name = "psnr")]
fn py_psnr(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    psnr(&a.inner, &b.inner).map_err(py_err)
}

#[pyfunction(name = "ssim")]
fn py_ssim(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    ssim(&a.inner, &b.inner).map_err(py_err)
}

#[pyfunction(name = "rec_loss")]
fn py_rec_loss(sr: &PyImage, hr: &PyImage) -> PyResult<f64> {
    rec_loss(&sr.inner, &hr.inner).map_err(py_err)
}

/// Texture loss of `sr` features (one per pyramid layer) against the pyramid.
#[pyfunction(name = "texture_loss")]
fn py_texture_loss(features: Vec<PyFeatureMap>, pyramid: &PySwappedPyramid) -> PyResult<f64> {
    let feats: Vec<FeatureMap> = features.into_iter().map(|f| f.inner).collect();
    texture_loss(&feats, &pyramid.inner, &TextureLossConfig::default()).map_err(py_err)
}

#[pyfunction(name = "gen_warped_ref")]
fn py_gen_warped_ref(hr: &PyImage, seed: u64) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: gen_warped_ref(&hr.inner, seed).map_err(py_err)?,
    })
}

/// Number of patch centers of either image with a close match in the other.
#[pyfunction(name = "match_count")]
#[pyo3(signature = (a, b, weights, tau = None))]
fn py_match_count(a: &PyImage, b: &PyImage, weights: &PyWeightStore, tau: Option<f64>) -> PyResult<usize> {
    let mut cfg = MatchCountConfig::default();
    if let Some(t) = tau {
        cfg.tau = t;
    }
    match_count(&a.inner, &b.inner, &weights.inner, &NetworkConfig::vgg19(), &cfg).map_err(py_err)
}

#[pymodule]
fn ntt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyFeatureMap>()?;
    m.add_class::<PyWeightStore>()?;
    m.add_class::<PySwappedPyramid>()?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(match_features, m)?)?;
    m.add_function(wrap_pyfunction!(swap, m)?)?;
    m.add_function(wrap_pyfunction!(transfer, m)?)?;
    m.add_function(wrap_pyfunction!(py_psnr, m)?)?;
    m.add_function(wrap_pyfunction!(py_ssim, m)?)?;
    m.add_function(wrap_pyfunction!(py_rec_loss, m)?)?;
    m.add_function(wrap_pyfunction!(py_texture_loss, m)?)?;
    m.add_function(wrap_pyfunction!(py_gen_warped_ref, m)?)?;
    m.add_function(wrap_pyfunction!(py_match_count, m)?)?;
    Ok(())
}
