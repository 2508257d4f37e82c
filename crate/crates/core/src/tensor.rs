use crate::error::{Error, Result};

/// Channel-major `C×H×W` activation tensor tagged with the layer that
/// produced it and its cumulative pooling stride relative to the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    layer: String,
    stride: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        layer: impl Into<String>,
        stride: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{channels}x{height}x{width} feature map needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if stride == 0 {
            return Err(Error::Shape("feature map stride must be positive".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            layer: layer.into(),
            stride,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::new(channels, height, width, "", 1, vec![0.0; channels * height * width])
            .expect("zeros shape")
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, "", 1, data).expect("from_fn shape")
    }

    pub fn with_tag(mut self, layer: impl Into<String>, stride: usize) -> Self {
        assert!(stride > 0, "stride must be positive");
        self.layer = layer.into();
        self.stride = stride;
        self
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn layer(&self) -> &str {
        &self.layer
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Channel-wise concatenation `(self ‖ other)`, `self` channels first.
    pub fn concat(&self, other: &FeatureMap) -> Result<FeatureMap> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::Shape(format!(
                "cannot concatenate {}x{} with {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        FeatureMap::new(
            self.channels + other.channels,
            self.height,
            self.width,
            self.layer.clone(),
            self.stride,
            data,
        )
    }

    /// Element-wise sum; shapes must match.
    pub fn add(&self, other: &FeatureMap) -> Result<FeatureMap> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = self.clone();
        out.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(out)
    }

    /// Multiplies every channel by a single-channel weight map of the same
    /// spatial size.
    pub fn scale_by_map(&self, weights: &FeatureMap) -> Result<FeatureMap> {
        if weights.channels != 1 || weights.height != self.height || weights.width != self.width {
            return Err(Error::Shape(format!(
                "weight map {:?} does not broadcast over {:?}",
                weights.shape(),
                self.shape()
            )));
        }
        let n = self.height * self.width;
        let mut out = self.clone();
        for plane in out.data.chunks_exact_mut(n) {
            plane
                .iter_mut()
                .zip(&weights.data)
                .for_each(|(v, w)| *v *= w);
        }
        Ok(out)
    }
}
