//! Image buffers, PNG/PPM I/O and bicubic resampling.
//!
//! Intensities live in the unit interval. Resampling may overshoot it
//! (the bicubic kernel has negative lobes); values are only clamped when an
//! image is quantized for saving.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major `(row, column, channel)` image with `f32` intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} image needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels])
            .expect("filled image shape")
    }

    /// Builds an image by evaluating `f(row, col, channel)` for every element.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data).expect("from_fn image shape")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
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
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Copy with every value clamped to `[0, 1]`.
    pub fn clamped(&self) -> ImageBuffer {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        out
    }

    /// BT.601 luma; single-channel images are returned unchanged.
    pub fn to_luma(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        ImageBuffer::new(self.height, self.width, 1, data).expect("luma shape")
    }

    /// Replicates a gray image into three channels; RGB is returned unchanged.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageBuffer::new(self.height, self.width, 3, data).expect("rgb shape")
    }

    /// Crops the `height`×`width` window whose top-left corner is `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<ImageBuffer> {
        if height == 0 || width == 0 || y0 + height > self.height || x0 + width > self.width {
            return Err(Error::Shape(format!(
                "crop {height}x{width} at ({y0}, {x0}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        Ok(ImageBuffer::from_fn(height, width, self.channels, |y, x, c| {
            self.get(y0 + y, x0 + x, c)
        }))
    }

    /// Resizes to exactly `height`×`width` by clamping source coordinates
    /// (crops when shrinking, repeats the last row/column when growing).
    pub fn fit_to(&self, height: usize, width: usize) -> ImageBuffer {
        if height == self.height && width == self.width {
            return self.clone();
        }
        ImageBuffer::from_fn(height, width, self.channels, |y, x, c| {
            self.get(y.min(self.height - 1), x.min(self.width - 1), c)
        })
    }
}

/// Maps a unit-interval value to a byte: `round(v × 255)` with halves rounded
/// away from zero, clamped to `[0, 255]`.
#[inline]
pub fn quantize(v: f32) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Loads an 8-bit PNG (gray or RGB, alpha dropped) or a binary PPM/PGM.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(path, &bytes)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
        decode_pnm(path, &bytes)
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
        })
    }
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<ImageBuffer> {
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    // Palette and sub-byte gray expand to 8 bits; 16-bit stays 16-bit so it can be rejected.
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| decode_err(e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            depth: depth as u32,
        });
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| decode_err("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| decode_err(e.to_string()))?;
    let (height, width) = (info.height as usize, info.width as usize);
    let pixels = &buf[..info.buffer_size()];
    let (src_channels, keep) = match color {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => return Err(decode_err("unexpanded palette".into())),
    };
    let mut data = Vec::with_capacity(height * width * keep);
    for px in pixels.chunks_exact(src_channels) {
        data.extend(px[..keep].iter().map(|&b| b as f32 / 255.0));
    }
    ImageBuffer::new(height, width, keep, data)
}

fn decode_pnm(path: &Path, bytes: &[u8]) -> Result<ImageBuffer> {
    let decode_err = |reason: &str| Error::Decode {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let channels = if bytes[1] == b'6' { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(decode_err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| decode_err("malformed header"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            depth: if maxval > 255 { 16 } else { 8 },
        });
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(decode_err("malformed header"));
    }
    pos += 1;
    let n = height * width * channels;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| decode_err("truncated raster"))?;
    if height == 0 || width == 0 {
        return Err(decode_err("empty image"));
    }
    ImageBuffer::new(
        height,
        width,
        channels,
        raster.iter().map(|&b| b as f32 / 255.0).collect(),
    )
}

/// Writes PNG, or binary PPM/PGM when the extension is `.ppm`/`.pgm`.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let is_pnm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pgm"));
    let io_err = |e: std::io::Error| Error::io(path, e);
    if is_pnm {
        let magic = if img.channels == 3 { "P6" } else { "P5" };
        write!(out, "{magic}\n{} {}\n255\n", img.width, img.height).map_err(io_err)?;
        out.write_all(&bytes).map_err(io_err)?;
    } else {
        let mut encoder = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        encoder.set_color(if img.channels == 3 {
            png::ColorType::Rgb
        } else {
            png::ColorType::Grayscale
        });
        encoder.set_depth(png::BitDepth::Eight);
        let encode_err = |e: png::EncodingError| match e {
            png::EncodingError::IoError(e) => Error::io(path, e),
            other => Error::Decode {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        };
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer.write_image_data(&bytes).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
    }
    out.flush().map_err(io_err)
}

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn keys_kernel(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Four clamped source taps and normalized weights for each output coordinate.
fn bicubic_taps(in_len: usize, out_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let mut idx = [0usize; 4];
            let mut w = [0f64; 4];
            for k in 0..4 {
                let offset = k as f64 - 1.0;
                let i = (base as i64 + k as i64 - 1).clamp(0, in_len as i64 - 1);
                idx[k] = i as usize;
                w[k] = keys_kernel(frac - offset);
            }
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= sum);
            (idx, w)
        })
        .collect()
}

/// Separable bicubic resize to an explicit output size.
pub fn resize_bicubic(img: &ImageBuffer, out_height: usize, out_width: usize) -> Result<ImageBuffer> {
    if out_height == 0 || out_width == 0 {
        return Err(Error::Shape(format!(
            "resize target {out_height}x{out_width} is empty"
        )));
    }
    if out_height == img.height && out_width == img.width {
        return Ok(img.clone());
    }
    let c = img.channels;
    let col_taps = bicubic_taps(img.width, out_width);
    let row_taps = bicubic_taps(img.height, out_height);

    let mut horiz = vec![0f64; img.height * out_width * c];
    for y in 0..img.height {
        for (x, (idx, w)) in col_taps.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += w[k] * img.get(y, idx[k], ch) as f64;
                }
                horiz[(y * out_width + x) * c + ch] = acc;
            }
        }
    }
    let mut data = vec![0f32; out_height * out_width * c];
    for (y, (idx, w)) in row_taps.iter().enumerate() {
        for x in 0..out_width {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += w[k] * horiz[(idx[k] * out_width + x) * c + ch];
                }
                data[(y * out_width + x) * c + ch] = acc as f32;
            }
        }
    }
    ImageBuffer::new(out_height, out_width, c, data)
}

/// Output extent for a resampling factor: `round(len × factor)`.
pub fn scaled_len(len: usize, factor: f64) -> usize {
    (len as f64 * factor).round() as usize
}

/// Bicubic resampling by a positive factor; output size is `round(dim × factor)`.
pub fn bicubic_resample(img: &ImageBuffer, factor: f64) -> Result<ImageBuffer> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidFactor(factor));
    }
    let (h, w) = (scaled_len(img.height, factor), scaled_len(img.width, factor));
    if h == 0 || w == 0 {
        return Err(Error::InvalidFactor(factor));
    }
    resize_bicubic(img, h, w)
}

/// Frequency-matched reference: bicubic down then up by `factor`, restored
/// to the original size by edge clamping if rounding changed it.
pub fn degrade_ref(img: &ImageBuffer, factor: u32) -> Result<ImageBuffer> {
    if factor < 2 {
        return Err(Error::InvalidFactor(factor as f64));
    }
    let down = bicubic_resample(img, 1.0 / factor as f64)?;
    let up = bicubic_resample(&down, factor as f64)?;
    Ok(up.fit_to(img.height, img.width))
}

/// Bilinear sample at continuous pixel coordinates; `None` outside the
/// pixel-center hull `[0, h-1] × [0, w-1]`.
pub fn sample_bilinear(img: &ImageBuffer, y: f64, x: f64, c: usize) -> Option<f32> {
    const EPS: f64 = 1e-9;
    let (hmax, wmax) = ((img.height - 1) as f64, (img.width - 1) as f64);
    if !(y >= -EPS && y <= hmax + EPS && x >= -EPS && x <= wmax + EPS) {
        return None;
    }
    let y = y.clamp(0.0, hmax);
    let x = x.clamp(0.0, wmax);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(img.height - 1), (x0 + 1).min(img.width - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let top = img.get(y0, x0, c) as f64 * (1.0 - fx) + img.get(y0, x1, c) as f64 * fx;
    let bottom = img.get(y1, x0, c) as f64 * (1.0 - fx) + img.get(y1, x1, c) as f64 * fx;
    Some((top * (1.0 - fy) + bottom * fy) as f32)
}

/// Exact counter-clockwise rotation by `quarter_turns` × 90°.
pub fn rotate_quarter_turns(img: &ImageBuffer, quarter_turns: i64) -> ImageBuffer {
    let (h, w) = (img.height, img.width);
    match quarter_turns.rem_euclid(4) {
        0 => img.clone(),
        1 => ImageBuffer::from_fn(w, h, img.channels, |r, c, ch| img.get(c, w - 1 - r, ch)),
        2 => ImageBuffer::from_fn(h, w, img.channels, |r, c, ch| {
            img.get(h - 1 - r, w - 1 - c, ch)
        }),
        _ => ImageBuffer::from_fn(w, h, img.channels, |r, c, ch| img.get(h - 1 - c, r, ch)),
    }
}

/// Width and height of the largest axis-aligned rectangle inside a
/// `width`×`height` rectangle rotated by `radians`.
pub fn max_interior_rect(width: f64, height: f64, radians: f64) -> (f64, f64) {
    if width <= 0.0 || height <= 0.0 {
        return (0.0, 0.0);
    }
    let width_is_longer = width >= height;
    let (long, short) = if width_is_longer {
        (width, height)
    } else {
        (height, width)
    };
    let (sin_a, cos_a) = (radians.sin().abs(), radians.cos().abs());
    if short <= 2.0 * sin_a * cos_a * long || (sin_a - cos_a).abs() < 1e-10 {
        let half = 0.5 * short;
        if width_is_longer {
            (half / sin_a, half / cos_a)
        } else {
            (half / cos_a, half / sin_a)
        }
    } else {
        let cos_2a = cos_a * cos_a - sin_a * sin_a;
        (
            (width * cos_a - height * sin_a) / cos_2a,
            (height * cos_a - width * sin_a) / cos_2a,
        )
    }
}

/// Counter-clockwise rotation about the image center, cropped to the largest
/// axis-aligned rectangle that contains no out-of-image samples. Multiples of
/// 90° take the exact index-permutation path.
pub fn rotate(img: &ImageBuffer, degrees: f64) -> Result<ImageBuffer> {
    if !degrees.is_finite() {
        return Err(Error::Config(format!("rotation angle {degrees}")));
    }
    let turns = degrees / 90.0;
    if (turns - turns.round()).abs() < 1e-12 {
        return Ok(rotate_quarter_turns(img, turns.round() as i64));
    }
    let theta = degrees.to_radians();
    // extents measured between outermost pixel centers
    let (rw, rh) = max_interior_rect((img.width - 1) as f64, (img.height - 1) as f64, theta);
    let out_w = (rw + 1e-9).floor() as usize + 1;
    let out_h = (rh + 1e-9).floor() as usize + 1;
    let (cy, cx) = ((img.height - 1) as f64 / 2.0, (img.width - 1) as f64 / 2.0);
    let (ocy, ocx) = ((out_h - 1) as f64 / 2.0, (out_w - 1) as f64 / 2.0);
    let (sin_t, cos_t) = theta.sin_cos();
    let mut out = ImageBuffer::filled(out_h, out_w, img.channels, 0.0);
    for r in 0..out_h {
        for c in 0..out_w {
            let (u, v) = (c as f64 - ocx, r as f64 - ocy);
            let sx = u * cos_t - v * sin_t + cx;
            let sy = u * sin_t + v * cos_t + cy;
            for ch in 0..img.channels {
                let val = sample_bilinear(img, sy, sx, ch).ok_or(Error::Shape(
                    "rotation sampled outside the source".to_string(),
                ))?;
                out.set(r, c, ch, val);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> ImageBuffer {
        ImageBuffer::from_fn(h, w, c, |y, x, ch| {
            ((y * 7 + x * 3 + ch * 5) % 17) as f32 / 16.0
        })
    }

    #[test]
    fn keys_weights_at_half_offset() {
        assert_eq!(keys_kernel(0.5), 0.5625);
        assert_eq!(keys_kernel(1.5), -0.0625);
        assert_eq!(keys_kernel(0.0), 1.0);
        assert_eq!(keys_kernel(1.0), 0.0);
        assert_eq!(keys_kernel(2.0), 0.0);
    }

    #[test]
    fn quantize_rules() {
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.7), 255);
    }

    #[test]
    fn constant_survives_resampling() {
        let img = ImageBuffer::filled(9, 13, 3, 0.5);
        for f in [0.25, 0.5, 2.0, 4.0] {
            let out = bicubic_resample(&img, f).unwrap();
            assert!(out.data().iter().all(|v| (v - 0.5).abs() < 1e-6), "factor {f}");
        }
    }

    #[test]
    fn factor_one_is_identity() {
        let img = ramp(7, 5, 3);
        assert_eq!(bicubic_resample(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn downscale_shape() {
        let img = ImageBuffer::filled(160, 160, 3, 0.1);
        let out = bicubic_resample(&img, 0.25).unwrap();
        assert_eq!((out.height(), out.width()), (40, 40));
    }

    #[test]
    fn bad_factors_rejected() {
        let img = ImageBuffer::filled(4, 4, 1, 0.0);
        assert!(matches!(bicubic_resample(&img, 0.0), Err(Error::InvalidFactor(_))));
        assert!(matches!(bicubic_resample(&img, -2.0), Err(Error::InvalidFactor(_))));
        assert!(matches!(bicubic_resample(&img, 0.01), Err(Error::InvalidFactor(_))));
        assert!(degrade_ref(&img, 1).is_err());
    }

    #[test]
    fn impulse_upscale_overshoots_below_zero() {
        let mut img = ImageBuffer::filled(5, 5, 1, 0.0);
        img.set(2, 2, 0, 1.0);
        let up = bicubic_resample(&img, 2.0).unwrap();
        assert!(up.data().iter().any(|&v| v < 0.0));
        assert!(up.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn impulse_upscale_matches_kernel_weights() {
        // 1-D row: output sample 2k+1 sits at source offset k + 0.25.
        let mut img = ImageBuffer::filled(1, 8, 1, 0.0);
        img.set(0, 4, 0, 1.0);
        let up = bicubic_resample(&img, 2.0).unwrap();
        // output 9 maps to source (9.5)/2 - 0.5 = 4.25
        let expect = keys_kernel(0.25);
        assert!((up.get(0, 9, 0) as f64 - expect).abs() < 1e-6);
        // output 6 maps to 2.75: distance 1.25 from the impulse
        assert!((up.get(0, 6, 0) as f64 - keys_kernel(1.25)).abs() < 1e-6);
    }

    #[test]
    fn degrade_restores_size_and_composes() {
        let img = ramp(160, 160, 3);
        let d = degrade_ref(&img, 4).unwrap();
        assert_eq!((d.height(), d.width()), (160, 160));
        let composed =
            bicubic_resample(&bicubic_resample(&img, 0.25).unwrap(), 4.0).unwrap();
        assert_eq!(d, composed);

        let odd = ramp(37, 41, 1);
        let d = degrade_ref(&odd, 4).unwrap();
        assert_eq!((d.height(), d.width()), (37, 41));

        let flat = ImageBuffer::filled(16, 16, 3, 0.3);
        let d = degrade_ref(&flat, 4).unwrap();
        assert!(d.data().iter().all(|v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn quarter_turn_matches_index_permutation() {
        let img = ramp(3, 5, 1);
        let r = rotate(&img, 90.0).unwrap();
        assert_eq!((r.height(), r.width()), (5, 3));
        for row in 0..5 {
            for col in 0..3 {
                assert_eq!(r.get(row, col, 0), img.get(col, 4 - row, 0));
            }
        }
        assert_eq!(rotate(&img, 360.0).unwrap(), img);
        let back = rotate(&rotate(&img, 90.0).unwrap(), -90.0).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn oblique_rotation_crops_inside() {
        let img = ImageBuffer::filled(40, 60, 3, 0.7);
        let r = rotate(&img, 20.0).unwrap();
        assert!(r.height() < 40 && r.width() < 60);
        assert!(r.data().iter().all(|v| (v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn bilinear_at_integer_points_is_exact() {
        let img = ramp(4, 4, 3);
        assert_eq!(sample_bilinear(&img, 2.0, 1.0, 2), Some(img.get(2, 1, 2)));
        assert_eq!(sample_bilinear(&img, -0.5, 1.0, 0), None);
    }
}
