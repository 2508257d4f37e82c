use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

/// Location of one patch: which source map it was cut from and its top-left cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchPos {
    pub source: usize,
    pub top: usize,
    pub left: usize,
}

/// Densely sampled square patches, stored as verbatim `C×size×size` crops
/// laid out back to back.
///
/// A grid built by [`sample_patches`] enumerates patches row-major over the
/// valid top-left positions, so index `i` is `row * cols + col`.
/// [`PatchGrid::concat`] joins grids from several sources into one index
/// space, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    size: usize,
    stride: usize,
    channels: usize,
    layer: String,
    /// `(rows, cols)` of each source's grid.
    dims: Vec<(usize, usize)>,
    positions: Vec<PatchPos>,
    kernels: Vec<f32>,
}

impl PatchGrid {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn layer(&self) -> &str {
        &self.layer
    }

    /// Values per patch: `channels × size × size`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.size * self.size
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(rows, cols)` for each source.
    pub fn source_dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    pub fn position(&self, i: usize) -> PatchPos {
        self.positions[i]
    }

    pub fn positions(&self) -> &[PatchPos] {
        &self.positions
    }

    /// Patch center `(x, y)` in its source map.
    pub fn center(&self, i: usize) -> (usize, usize) {
        let p = self.positions[i];
        let half = (self.size - 1) / 2;
        (p.left + half, p.top + half)
    }

    /// Kernel of patch `i`, channel-major `C×size×size`.
    pub fn kernel(&self, i: usize) -> &[f32] {
        let n = self.patch_len();
        &self.kernels[i * n..(i + 1) * n]
    }

    pub fn kernels(&self) -> &[f32] {
        &self.kernels
    }

    /// Joins grids of equal patch geometry into one index space; patches of
    /// `grids[k]` get source id `k`.
    pub fn concat(grids: Vec<PatchGrid>) -> Result<PatchGrid> {
        let mut iter = grids.into_iter();
        let mut out = iter.next().ok_or(Error::Empty("patch grid list"))?;
        for p in &mut out.positions {
            p.source = 0;
        }
        out.dims.truncate(1);
        for (k, g) in iter.enumerate() {
            if g.size != out.size || g.channels != out.channels || g.stride != out.stride {
                return Err(Error::Shape(format!(
                    "cannot join patch grids ({} ch, size {}) and ({} ch, size {})",
                    out.channels, out.size, g.channels, g.size
                )));
            }
            out.dims.push(g.dims[0]);
            out.positions
                .extend(g.positions.iter().map(|p| PatchPos { source: k + 1, ..*p }));
            out.kernels.extend_from_slice(&g.kernels);
        }
        Ok(out)
    }
}

/// Number of valid patch positions along one axis.
pub fn grid_len(len: usize, size: usize, stride: usize) -> usize {
    if size > len {
        0
    } else {
        (len - size) / stride + 1
    }
}

/// Enumerates every fully interior `size×size` patch with the given stride,
/// row-major.
pub fn sample_patches(fm: &FeatureMap, size: usize, stride: usize) -> Result<PatchGrid> {
    if stride == 0 || size == 0 {
        return Err(Error::Config("patch size and stride must be positive".into()));
    }
    let (c, h, w) = fm.shape();
    if size > h || size > w {
        return Err(Error::PatchTooLarge {
            size,
            height: h,
            width: w,
        });
    }
    let rows = grid_len(h, size, stride);
    let cols = grid_len(w, size, stride);
    let n = c * size * size;
    let mut kernels = Vec::with_capacity(rows * cols * n);
    let mut positions = Vec::with_capacity(rows * cols);
    for gy in 0..rows {
        for gx in 0..cols {
            let (top, left) = (gy * stride, gx * stride);
            positions.push(PatchPos {
                source: 0,
                top,
                left,
            });
            for ch in 0..c {
                let plane = fm.plane(ch);
                for y in top..top + size {
                    kernels.extend_from_slice(&plane[y * w + left..y * w + left + size]);
                }
            }
        }
    }
    Ok(PatchGrid {
        size,
        stride,
        channels: c,
        layer: fm.layer().to_string(),
        dims: vec![(rows, cols)],
        positions,
        kernels,
    })
}
