use super::matching::CorrespondenceMap;
use super::patches::PatchGrid;
use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

fn check_fit(corr: &CorrespondenceMap, height: usize, width: usize) -> Result<()> {
    let (gh, gw) = corr.grid();
    if gh == 0 || gw == 0 {
        return Ok(());
    }
    let (top, left) = corr.top_left(gh - 1, gw - 1);
    if top + corr.patch_size() > height || left + corr.patch_size() > width {
        return Err(Error::Shape(format!(
            "{gh}x{gw} correspondence grid (step {}, patch {}) overruns a {height}x{width} map",
            corr.lr_stride(),
            corr.patch_size()
        )));
    }
    Ok(())
}

/// Places the matched reference patch at every LR patch location and
/// averages overlaps. Returns the swapped map and the per-cell coverage
/// count; cells no patch reaches stay zero.
pub fn assemble_swap_map(
    corr: &CorrespondenceMap,
    ref_patches: &PatchGrid,
    target_shape: (usize, usize, usize),
) -> Result<(FeatureMap, Vec<u32>)> {
    let (c, h, w) = target_shape;
    if ref_patches.channels() != c {
        return Err(Error::ChannelMismatch {
            expected: c,
            got: ref_patches.channels(),
        });
    }
    if ref_patches.size() != corr.patch_size() {
        return Err(Error::Shape(format!(
            "reference patches are {0}x{0} but the correspondence places {1}x{1}",
            ref_patches.size(),
            corr.patch_size()
        )));
    }
    check_fit(corr, h, w)?;
    if let Some(&j) = corr.best_index().iter().find(|&&j| j >= ref_patches.len()) {
        return Err(Error::Shape(format!(
            "matched index {j} out of range for {} reference patches",
            ref_patches.len()
        )));
    }

    let s = corr.patch_size();
    let mut acc = vec![0f64; c * h * w];
    let mut coverage = vec![0u32; h * w];
    let (gh, gw) = corr.grid();
    for gy in 0..gh {
        for gx in 0..gw {
            let (top, left) = corr.top_left(gy, gx);
            let (j, _) = corr.best(gy, gx);
            let kernel = ref_patches.kernel(j);
            for ch in 0..c {
                for dy in 0..s {
                    let src = &kernel[(ch * s + dy) * s..(ch * s + dy + 1) * s];
                    let row = (ch * h + top + dy) * w + left;
                    for (a, &v) in acc[row..row + s].iter_mut().zip(src) {
                        *a += v as f64;
                    }
                }
            }
            for dy in 0..s {
                for cov in &mut coverage[(top + dy) * w + left..(top + dy) * w + left + s] {
                    *cov += 1;
                }
            }
        }
    }
    let mut data = vec![0f32; c * h * w];
    for ch in 0..c {
        for (i, &cov) in coverage.iter().enumerate() {
            if cov > 0 {
                data[ch * h * w + i] = (acc[ch * h * w + i] / cov as f64) as f32;
            }
        }
    }
    let uncovered = coverage.iter().filter(|&&c| c == 0).count();
    if uncovered > 0 {
        log::debug!("swap map: {uncovered} of {} cells uncovered", h * w);
    }
    Ok((FeatureMap::new(c, h, w, ref_patches.layer(), 1, data)?, coverage))
}

/// Single-channel map holding, per cell, the highest best-match score among
/// the LR patches that cover it (zero where uncovered).
pub fn score_map(corr: &CorrespondenceMap, height: usize, width: usize) -> Result<FeatureMap> {
    check_fit(corr, height, width)?;
    let s = corr.patch_size();
    let mut best = vec![f64::NEG_INFINITY; height * width];
    let (gh, gw) = corr.grid();
    for gy in 0..gh {
        for gx in 0..gw {
            let (top, left) = corr.top_left(gy, gx);
            let (_, score) = corr.best(gy, gx);
            for dy in 0..s {
                let row = (top + dy) * width + left;
                for b in &mut best[row..row + s] {
                    *b = b.max(score);
                }
            }
        }
    }
    let data = best
        .into_iter()
        .map(|v| if v == f64::NEG_INFINITY { 0.0 } else { v as f32 })
        .collect();
    FeatureMap::new(1, height, width, "score", 1, data)
}

#[cfg(test)]
mod tests {
    use super::super::patches::sample_patches;
    use super::*;

    #[test]
    fn constant_patch_fills_constant() {
        let refs = sample_patches(&FeatureMap::from_fn(2, 3, 3, |_, _, _| 0.25), 3, 1).unwrap();
        // stride == patch size: tiles without overlap
        let tiles = CorrespondenceMap::new(2, 3, 3, 3, vec![0; 6], vec![1.0; 6]).unwrap();
        let (m, cov) = assemble_swap_map(&tiles, &refs, (2, 7, 9)).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let covered = y < 6;
                assert_eq!(cov[y * 9 + x], covered as u32);
                assert_eq!(m.get(1, y, x), if covered { 0.25 } else { 0.0 });
            }
        }
        // stride 1: full overlap, same average
        let dense = CorrespondenceMap::new(5, 5, 1, 3, vec![0; 25], vec![1.0; 25]).unwrap();
        let (m, cov) = assemble_swap_map(&dense, &refs, (2, 7, 7)).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.25));
        assert_eq!(cov[3 * 7 + 3], 9);
        assert_eq!(cov[0], 1);
    }

    #[test]
    fn overrun_rejected() {
        let refs = sample_patches(&FeatureMap::zeros(1, 3, 3), 3, 1).unwrap();
        let corr = CorrespondenceMap::new(3, 3, 1, 3, vec![0; 9], vec![0.0; 9]).unwrap();
        assert!(assemble_swap_map(&corr, &refs, (1, 4, 5)).is_err());
        assert!(assemble_swap_map(&corr, &refs, (2, 5, 5)).is_err());
        let bad = CorrespondenceMap::new(3, 3, 1, 3, vec![1; 9], vec![0.0; 9]).unwrap();
        assert!(assemble_swap_map(&bad, &refs, (1, 5, 5)).is_err());
    }

    #[test]
    fn score_map_takes_max_over_cover() {
        let corr = CorrespondenceMap::new(1, 2, 1, 2, vec![0, 0], vec![0.5, 2.0]).unwrap();
        let s = score_map(&corr, 3, 3).unwrap();
        assert_eq!(s.get(0, 0, 0), 0.5);
        assert_eq!(s.get(0, 0, 1), 2.0);
        assert_eq!(s.get(0, 1, 2), 2.0);
        assert_eq!(s.get(0, 2, 2), 0.0);
    }
}
