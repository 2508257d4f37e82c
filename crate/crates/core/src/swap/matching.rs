//! Dense patch matching: every LR patch against every unit-normalized
//! reference patch, `S_j(x, y) = <P_xy(lr), P_j / |P_j|>`.
//!
//! Scores are accumulated in `f64` through a blocked GEMM over chunks of
//! [`REF_CHUNK`] reference patches. Both the materialized score volume and
//! the fused matcher go through the same chunk routine, so they agree bit for
//! bit. Cost is `O(N_lr · N_ref · C · size²)`.

use rayon::prelude::*;

use super::patches::{grid_len, PatchGrid};
use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

/// Reference patches scored per GEMM call.
pub const REF_CHUNK: usize = 256;

/// One similarity map per reference patch over the dense LR center grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVolume {
    n_ref: usize,
    grid_h: usize,
    grid_w: usize,
    patch_size: usize,
    /// `scores[j * grid_h * grid_w + gy * grid_w + gx]`
    scores: Vec<f64>,
}

impl ScoreVolume {
    /// Builds a volume from raw scores laid out `[j][gy][gx]`.
    pub fn new(
        n_ref: usize,
        grid_h: usize,
        grid_w: usize,
        patch_size: usize,
        scores: Vec<f64>,
    ) -> Result<Self> {
        if scores.len() != n_ref * grid_h * grid_w {
            return Err(Error::Shape(format!(
                "score volume {n_ref}x{grid_h}x{grid_w} needs {} values, got {}",
                n_ref * grid_h * grid_w,
                scores.len()
            )));
        }
        Ok(Self {
            n_ref,
            grid_h,
            grid_w,
            patch_size,
            scores,
        })
    }

    pub fn n_ref(&self) -> usize {
        self.n_ref
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.grid_h, self.grid_w)
    }

    pub fn get(&self, j: usize, gy: usize, gx: usize) -> f64 {
        self.scores[(j * self.grid_h + gy) * self.grid_w + gx]
    }

    /// Similarity map `S_j`, row-major over the LR grid.
    pub fn map(&self, j: usize) -> &[f64] {
        let n = self.grid_h * self.grid_w;
        &self.scores[j * n..(j + 1) * n]
    }
}

/// Best reference patch for each LR patch on a regular grid of patch
/// positions. Patch `(gy, gx)` has its top-left cell at
/// `(gy·lr_stride, gx·lr_stride)` and its center `anchor` cells further in.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMap {
    grid_h: usize,
    grid_w: usize,
    lr_stride: usize,
    patch_size: usize,
    anchor: usize,
    best_index: Vec<usize>,
    best_score: Vec<f64>,
}

impl CorrespondenceMap {
    pub fn new(
        grid_h: usize,
        grid_w: usize,
        lr_stride: usize,
        patch_size: usize,
        best_index: Vec<usize>,
        best_score: Vec<f64>,
    ) -> Result<Self> {
        if best_index.len() != grid_h * grid_w || best_score.len() != grid_h * grid_w {
            return Err(Error::Shape(format!(
                "correspondence grid {grid_h}x{grid_w} does not match {} indices / {} scores",
                best_index.len(),
                best_score.len()
            )));
        }
        if lr_stride == 0 || patch_size == 0 {
            return Err(Error::Config("stride and patch size must be positive".into()));
        }
        Ok(Self {
            grid_h,
            grid_w,
            lr_stride,
            patch_size,
            anchor: (patch_size - 1) / 2,
            best_index,
            best_score,
        })
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.grid_h, self.grid_w)
    }

    pub fn len(&self) -> usize {
        self.best_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best_index.is_empty()
    }

    pub fn lr_stride(&self) -> usize {
        self.lr_stride
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn best_index(&self) -> &[usize] {
        &self.best_index
    }

    pub fn best_score(&self) -> &[f64] {
        &self.best_score
    }

    /// `(j*, score)` at grid cell `(gy, gx)`.
    pub fn best(&self, gy: usize, gx: usize) -> (usize, f64) {
        let i = gy * self.grid_w + gx;
        (self.best_index[i], self.best_score[i])
    }

    /// Top-left `(row, col)` of the patch at grid cell `(gy, gx)`.
    pub fn top_left(&self, gy: usize, gx: usize) -> (usize, usize) {
        (gy * self.lr_stride, gx * self.lr_stride)
    }

    /// Patch center `(x, y)` at grid cell `(gy, gx)`.
    pub fn center(&self, gy: usize, gx: usize) -> (usize, usize) {
        let (top, left) = self.top_left(gy, gx);
        (left + self.anchor, top + self.anchor)
    }

    pub fn mean_score(&self) -> f64 {
        self.best_score.iter().sum::<f64>() / self.best_score.len().max(1) as f64
    }
}

/// LR patches as rows of an `n × (C·size²)` matrix, dense (stride 1),
/// row-major over centers.
pub(crate) fn lr_patch_rows(fm: &FeatureMap, size: usize) -> Result<(Vec<f64>, usize, usize)> {
    let (c, h, w) = fm.shape();
    if size > h || size > w {
        return Err(Error::PatchTooLarge {
            size,
            height: h,
            width: w,
        });
    }
    let (rows, cols) = (grid_len(h, size, 1), grid_len(w, size, 1));
    let d = c * size * size;
    let mut out = vec![0f64; rows * cols * d];
    out.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        let (gy, gx) = (i / cols, i % cols);
        let mut k = 0;
        for ch in 0..c {
            let plane = fm.plane(ch);
            for y in gy..gy + size {
                for &v in &plane[y * w + gx..y * w + gx + size] {
                    row[k] = v as f64;
                    k += 1;
                }
            }
        }
    });
    Ok((out, rows, cols))
}

/// Scores of all `lr` rows against reference patches `range`, written
/// row-major `n_lr × range.len()` into `out`. Zero-norm reference patches
/// score `-inf`.
pub(crate) fn chunk_scores(
    lr: &[f64],
    d: usize,
    refs: &PatchGrid,
    range: std::ops::Range<usize>,
    out: &mut Vec<f64>,
) {
    let n_lr = lr.len() / d;
    let n = range.len();
    let mut normalized = vec![0f64; n * d];
    let mut degenerate = vec![false; n];
    for (k, j) in range.enumerate() {
        let kernel = refs.kernel(j);
        let norm = kernel
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 || !norm.is_finite() {
            degenerate[k] = true;
            continue;
        }
        for (dst, &v) in normalized[k * d..(k + 1) * d].iter_mut().zip(kernel) {
            *dst = v as f64 / norm;
        }
    }
    out.clear();
    out.resize(n_lr * n, 0.0);
    if n_lr == 0 || n == 0 {
        return;
    }
    let rows_per_task = n_lr.div_ceil(rayon::current_num_threads().max(1) * 4).max(1);
    out.par_chunks_mut(rows_per_task * n)
        .zip(lr.par_chunks(rows_per_task * d))
        .for_each(|(dst, a)| {
            let m = dst.len() / n;
            // SAFETY: `a` is m×d row-major; `normalized` is n×d row-major and
            // read as its d×n transpose; `dst` is m×n row-major.
            unsafe {
                matrixmultiply::dgemm(
                    m,
                    d,
                    n,
                    1.0,
                    a.as_ptr(),
                    d as isize,
                    1,
                    normalized.as_ptr(),
                    1,
                    d as isize,
                    0.0,
                    dst.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
    for (k, _) in degenerate.iter().enumerate().filter(|(_, &dg)| dg) {
        for i in 0..n_lr {
            out[i * n + k] = f64::NEG_INFINITY;
        }
    }
}

fn check_channels(lr_fm: &FeatureMap, refs: &PatchGrid) -> Result<()> {
    if lr_fm.channels() != refs.channels() {
        return Err(Error::ChannelMismatch {
            expected: refs.channels(),
            got: lr_fm.channels(),
        });
    }
    if refs.is_empty() {
        return Err(Error::Empty("reference patch set"));
    }
    Ok(())
}

/// Full similarity volume: one map `S_j` per reference patch.
pub fn correlation_maps(lr_fm: &FeatureMap, refs: &PatchGrid) -> Result<ScoreVolume> {
    check_channels(lr_fm, refs)?;
    let size = refs.size();
    let (lr, rows, cols) = lr_patch_rows(lr_fm, size)?;
    let d = refs.patch_len();
    let n_lr = rows * cols;
    let mut scores = vec![0f64; refs.len() * n_lr];
    let mut buf = Vec::new();
    for start in (0..refs.len()).step_by(REF_CHUNK) {
        let end = (start + REF_CHUNK).min(refs.len());
        chunk_scores(&lr, d, refs, start..end, &mut buf);
        let n = end - start;
        for i in 0..n_lr {
            for k in 0..n {
                scores[(start + k) * n_lr + i] = buf[i * n + k];
            }
        }
    }
    ScoreVolume::new(refs.len(), rows, cols, size, scores)
}

/// Per-center argmax over `j`; ties go to the smallest index.
pub fn best_match(scores: &ScoreVolume) -> Result<CorrespondenceMap> {
    let (gh, gw) = scores.grid();
    let n_lr = gh * gw;
    let mut best_index = vec![0usize; n_lr];
    let mut best_score = vec![f64::NEG_INFINITY; n_lr];
    for j in 0..scores.n_ref() {
        for (i, &s) in scores.map(j).iter().enumerate() {
            if s > best_score[i] {
                best_score[i] = s;
                best_index[i] = j;
            }
        }
    }
    if let Some(i) = best_score.iter().position(|s| *s == f64::NEG_INFINITY) {
        return Err(degenerate_at(scores.patch_size, gw, i));
    }
    CorrespondenceMap::new(gh, gw, 1, scores.patch_size, best_index, best_score)
}

fn degenerate_at(size: usize, grid_w: usize, i: usize) -> Error {
    let half = (size - 1) / 2;
    Error::AllDegenerate {
        x: i % grid_w + half,
        y: i / grid_w + half,
    }
}

/// Running-argmax best match for each row of `lr` (no volume materialized).
pub(crate) fn best_rows(lr: &[f64], d: usize, refs: &PatchGrid) -> (Vec<usize>, Vec<f64>) {
    let n_lr = lr.len() / d;
    let mut best_index = vec![0usize; n_lr];
    let mut best_score = vec![f64::NEG_INFINITY; n_lr];
    let mut buf = Vec::new();
    for start in (0..refs.len()).step_by(REF_CHUNK) {
        let end = (start + REF_CHUNK).min(refs.len());
        chunk_scores(lr, d, refs, start..end, &mut buf);
        let n = end - start;
        best_index
            .par_iter_mut()
            .zip(best_score.par_iter_mut())
            .zip(buf.par_chunks(n))
            .for_each(|((bi, bs), row)| {
                for (k, &s) in row.iter().enumerate() {
                    if s > *bs {
                        *bs = s;
                        *bi = start + k;
                    }
                }
            });
    }
    (best_index, best_score)
}

/// Fused equivalent of `best_match(&correlation_maps(lr_fm, refs)?)`.
pub fn match_patches(lr_fm: &FeatureMap, refs: &PatchGrid) -> Result<CorrespondenceMap> {
    check_channels(lr_fm, refs)?;
    let size = refs.size();
    let (lr, rows, cols) = lr_patch_rows(lr_fm, size)?;
    let (best_index, best_score) = best_rows(&lr, refs.patch_len(), refs);
    if let Some(i) = best_score.iter().position(|s| *s == f64::NEG_INFINITY) {
        return Err(degenerate_at(size, cols, i));
    }
    CorrespondenceMap::new(rows, cols, 1, size, best_index, best_score)
}

/// Rescales a correspondence found at a coarse layer to a finer one: patch
/// positions, footprints and the LR grid step all grow by
/// `from_stride / to_stride`; matched indices and scores are unchanged.
pub fn project_correspondence(
    corr: &CorrespondenceMap,
    from_stride: usize,
    to_stride: usize,
) -> Result<CorrespondenceMap> {
    if to_stride == 0 || from_stride == 0 || from_stride % to_stride != 0 {
        return Err(Error::StrideNotDivisible {
            from: from_stride,
            to: to_stride,
        });
    }
    let f = from_stride / to_stride;
    Ok(CorrespondenceMap {
        lr_stride: corr.lr_stride * f,
        patch_size: corr.patch_size * f,
        anchor: corr.anchor * f,
        ..corr.clone()
    })
}
