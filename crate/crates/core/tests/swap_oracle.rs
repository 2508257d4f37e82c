mod common;

use ntt_core::swap::{
    assemble_swap_map, best_match, correlation_maps, match_patches, project_correspondence,
    sample_patches, score_map, ScoreVolume, REF_CHUNK,
};
use ntt_core::{CorrespondenceMap, Error, FeatureMap, PatchGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `S_j(x, y)` straight from the definition: patch from the LR map at
/// `(gy, gx)` dotted with the unit-normalized kernel `j`.
fn score_oracle(lr: &FeatureMap, refs: &PatchGrid, j: usize, gy: usize, gx: usize) -> f64 {
    let s = refs.size();
    let k = refs.kernel(j);
    let norm = k.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut dot = 0.0;
    for c in 0..lr.channels() {
        for dy in 0..s {
            for dx in 0..s {
                dot += lr.get(c, gy + dy, gx + dx) as f64 * k[(c * s + dy) * s + dx] as f64;
            }
        }
    }
    dot / norm
}

fn argmax_oracle(lr: &FeatureMap, refs: &PatchGrid) -> (Vec<usize>, Vec<f64>) {
    let s = refs.size();
    let (gh, gw) = (lr.height() - s + 1, lr.width() - s + 1);
    let mut idx = Vec::new();
    let mut best = Vec::new();
    for gy in 0..gh {
        for gx in 0..gw {
            let mut b = (0, f64::NEG_INFINITY);
            for j in 0..refs.len() {
                let v = score_oracle(lr, refs, j, gy, gx);
                if v > b.1 {
                    b = (j, v);
                }
            }
            idx.push(b.0);
            best.push(b.1);
        }
    }
    (idx, best)
}

fn random_case(rng: &mut ChaCha8Rng) -> (FeatureMap, PatchGrid) {
    let c = rng.random_range(1..=4);
    let size = [1, 3, 3, 5][rng.random_range(0..4)];
    let h = rng.random_range(size..=16);
    let w = rng.random_range(size..=16);
    let lr = common::random_map(rng, c, h, w);
    let rh = rng.random_range(size..=size + 6);
    let rw = rng.random_range(size..=size + 6);
    let refs = sample_patches(&common::random_map(rng, c, rh, rw), size, rng.random_range(1..=2)).unwrap();
    (lr, refs)
}

#[test]
fn matcher_equals_brute_force() {
    let mut rng = common::rng(100);
    for trial in 0..60 {
        let (lr, refs) = random_case(&mut rng);
        let fused = match_patches(&lr, &refs).unwrap();
        let vol = correlation_maps(&lr, &refs).unwrap();
        let via_volume = best_match(&vol).unwrap();
        assert_eq!(fused, via_volume, "trial {trial}: fused and volume disagree");
        let (idx, best) = argmax_oracle(&lr, &refs);
        assert_eq!(fused.best_index(), &idx[..], "trial {trial}");
        for (a, b) in fused.best_score().iter().zip(&best) {
            assert!((a - b).abs() <= 1e-5, "trial {trial}: {a} vs {b}");
        }
        let (gh, gw) = vol.grid();
        for j in 0..refs.len() {
            for gy in 0..gh {
                for gx in 0..gw {
                    assert!((vol.get(j, gy, gx) - score_oracle(&lr, &refs, j, gy, gx)).abs() <= 1e-5);
                }
            }
        }
    }
}

#[test]
fn chunk_boundaries_do_not_change_result() {
    let mut rng = common::rng(101);
    let lr = common::random_map(&mut rng, 2, 6, 6);
    // more patches than one chunk
    let r = common::random_map(&mut rng, 2, 20, REF_CHUNK / 16 + 4);
    let refs = sample_patches(&r, 3, 1).unwrap();
    assert!(refs.len() > REF_CHUNK);
    let (idx, best) = argmax_oracle(&lr, &refs);
    let got = match_patches(&lr, &refs).unwrap();
    assert_eq!(got.best_index(), &idx[..]);
    assert!(got.best_score().iter().zip(&best).all(|(a, b)| (a - b).abs() <= 1e-9));
    assert_eq!(best_match(&correlation_maps(&lr, &refs).unwrap()).unwrap(), got);
}

#[test]
fn lr_side_is_not_normalized() {
    let mut rng = common::rng(102);
    let lr = common::random_map(&mut rng, 3, 7, 7);
    let refs = sample_patches(&common::random_map(&mut rng, 3, 5, 5), 3, 1).unwrap();
    let doubled = FeatureMap::from_fn(3, 7, 7, |c, y, x| 2.0 * lr.get(c, y, x));
    let a = correlation_maps(&lr, &refs).unwrap();
    let b = correlation_maps(&doubled, &refs).unwrap();
    for j in 0..refs.len() {
        for (p, q) in a.map(j).iter().zip(b.map(j)) {
            assert!((2.0 * p - q).abs() < 1e-9);
        }
    }
}

#[test]
fn self_match_reaches_the_norm() {
    let mut rng = common::rng(103);
    for _ in 0..20 {
        let lr = common::random_map(&mut rng, 3, 9, 8);
        let lr_grid = sample_patches(&lr, 3, 1).unwrap();
        let mut r = common::random_map(&mut rng, 3, 6, 6);
        // plant LR patch at grid (gy, gx) into the reference at (1, 2)
        let (gy, gx) = (rng.random_range(0..7), rng.random_range(0..6));
        for c in 0..3 {
            for dy in 0..3 {
                for dx in 0..3 {
                    r.set(c, 1 + dy, 2 + dx, lr.get(c, gy + dy, gx + dx));
                }
            }
        }
        let refs = sample_patches(&r, 3, 1).unwrap();
        let p = lr_grid.kernel(gy * 6 + gx);
        let norm = p.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        let corr = match_patches(&lr, &refs).unwrap();
        let (j, s) = corr.best(gy, gx);
        assert!((s - norm).abs() <= 1e-5, "best {s} vs norm {norm}");
        // Cauchy-Schwarz: nothing beats the norm
        let vol = correlation_maps(&lr, &refs).unwrap();
        assert!((0..refs.len()).all(|k| vol.get(k, gy, gx) <= norm + 1e-9));
        assert!((vol.get(1 * 4 + 2, gy, gx) - norm).abs() <= 1e-5);
        assert!(j < refs.len());
    }
}

#[test]
fn ties_go_to_smallest_index() {
    let vol = ScoreVolume::new(4, 1, 2, 1, vec![0.1, 0.9, 0.7, 0.9, 0.5, 0.2, 0.7, 0.9]).unwrap();
    let corr = best_match(&vol).unwrap();
    assert_eq!(corr.best_index(), &[1, 0]);
    // duplicated reference patches: the first copy wins
    let lr = FeatureMap::from_fn(1, 3, 3, |_, y, x| (y * 3 + x) as f32);
    let r = FeatureMap::from_fn(1, 3, 6, |_, y, x| (y * 3 + x % 3) as f32);
    let refs = sample_patches(&r, 3, 3).unwrap();
    assert_eq!(match_patches(&lr, &refs).unwrap().best_index(), &[0]);
}

#[test]
fn all_degenerate_is_an_error() {
    let lr = FeatureMap::from_fn(1, 4, 4, |_, _, _| 1.0);
    let refs = sample_patches(&FeatureMap::zeros(1, 3, 3), 3, 1).unwrap();
    assert!(matches!(match_patches(&lr, &refs), Err(Error::AllDegenerate { x: 1, y: 1 })));
    let vol = correlation_maps(&lr, &refs).unwrap();
    assert!(vol.map(0).iter().all(|s| *s == f64::NEG_INFINITY));
    assert!(best_match(&vol).is_err());
}

#[test]
fn channel_mismatch_is_rejected() {
    let lr = FeatureMap::zeros(2, 4, 4);
    let refs = sample_patches(&FeatureMap::zeros(3, 3, 3), 3, 1).unwrap();
    assert!(matches!(match_patches(&lr, &refs), Err(Error::ChannelMismatch { .. })));
}

/// Accumulate every placed patch into a sum and a count, then divide.
fn assemble_oracle(
    corr: &CorrespondenceMap,
    refs: &PatchGrid,
    (c, h, w): (usize, usize, usize),
) -> (Vec<f64>, Vec<u32>) {
    let s = corr.patch_size();
    let mut sum = vec![0f64; c * h * w];
    let mut cnt = vec![0u32; h * w];
    let (gh, gw) = corr.grid();
    for gy in 0..gh {
        for gx in 0..gw {
            let (top, left) = corr.top_left(gy, gx);
            let (j, _) = corr.best(gy, gx);
            let k = refs.kernel(j);
            for ch in 0..c {
                for dy in 0..s {
                    for dx in 0..s {
                        sum[(ch * h + top + dy) * w + left + dx] += k[(ch * s + dy) * s + dx] as f64;
                    }
                }
            }
            for dy in 0..s {
                for dx in 0..s {
                    cnt[(top + dy) * w + left + dx] += 1;
                }
            }
        }
    }
    let avg = sum
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let n = cnt[i % (h * w)];
            if n == 0 {
                0.0
            } else {
                v / n as f64
            }
        })
        .collect();
    (avg, cnt)
}

fn random_corr(rng: &mut ChaCha8Rng, gh: usize, gw: usize, step: usize, size: usize, n: usize) -> CorrespondenceMap {
    let idx = (0..gh * gw).map(|_| rng.random_range(0..n)).collect();
    let scores = (0..gh * gw).map(|_| rng.random_range(0.0..3.0)).collect();
    CorrespondenceMap::new(gh, gw, step, size, idx, scores).unwrap()
}

#[test]
fn assembly_equals_accumulate_divide() {
    let mut rng = common::rng(104);
    for trial in 0..60 {
        let size = rng.random_range(1..=4);
        let step = match trial % 3 {
            0 => 1,
            1 => size,
            _ => rng.random_range(1..=size + 1),
        };
        let c = rng.random_range(1..=3);
        let (gh, gw) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let h = (gh - 1) * step + size + rng.random_range(0..=2);
        let w = (gw - 1) * step + size + rng.random_range(0..=2);
        let r = common::random_map(&mut rng, c, size + 3, size + 2);
        let refs = sample_patches(&r, size, 1).unwrap();
        let corr = random_corr(&mut rng, gh, gw, step, size, refs.len());
        let (m, cov) = assemble_swap_map(&corr, &refs, (c, h, w)).unwrap();
        let (want, want_cov) = assemble_oracle(&corr, &refs, (c, h, w));
        assert_eq!(cov, want_cov);
        for (a, b) in m.data().iter().zip(&want) {
            assert!((*a as f64 - b).abs() <= 1e-6, "trial {trial}");
        }
        // conservation: sum(M × coverage) equals the sum of placed values
        let placed: f64 = (0..gh * gw)
            .map(|i| refs.kernel(corr.best_index()[i]).iter().map(|&v| v as f64).sum::<f64>())
            .sum();
        let back: f64 = (0..c)
            .flat_map(|ch| (0..h * w).map(move |i| (ch, i)))
            .map(|(ch, i)| m.data()[ch * h * w + i] as f64 * cov[i] as f64)
            .sum();
        assert!((placed - back).abs() <= 1e-4 * placed.abs().max(1.0), "trial {trial}");
    }
}

#[test]
fn assembly_shape_errors() {
    let refs = sample_patches(&FeatureMap::zeros(2, 3, 3), 3, 1).unwrap();
    let corr = CorrespondenceMap::new(3, 3, 1, 3, vec![0; 9], vec![0.0; 9]).unwrap();
    assert!(assemble_swap_map(&corr, &refs, (2, 4, 5)).is_err());
    assert!(matches!(
        assemble_swap_map(&corr, &refs, (3, 5, 5)),
        Err(Error::ChannelMismatch { .. })
    ));
    let bad = CorrespondenceMap::new(3, 3, 1, 3, vec![1; 9], vec![0.0; 9]).unwrap();
    assert!(assemble_swap_map(&bad, &refs, (2, 5, 5)).is_err());
}

#[test]
fn projection_scales_positions_and_footprint() {
    let corr = CorrespondenceMap::new(6, 8, 1, 3, (0..48).collect(), vec![0.5; 48]).unwrap();
    assert_eq!(project_correspondence(&corr, 4, 4).unwrap(), corr);
    let p = project_correspondence(&corr, 4, 2).unwrap();
    // grid cell whose stride-4 center is (3, 5)
    let (gy, gx) = (4, 2);
    assert_eq!(corr.center(gy, gx), (3, 5));
    assert_eq!(p.top_left(gy, gx), (8, 4));
    assert_eq!(p.patch_size(), 6);
    assert_eq!(p.best_index(), corr.best_index());
    assert_eq!(p.best_score(), corr.best_score());
    assert!(matches!(
        project_correspondence(&corr, 4, 3),
        Err(Error::StrideNotDivisible { from: 4, to: 3 })
    ));
}

#[test]
fn projected_dense_match_covers_every_cell() {
    let mut rng = common::rng(105);
    // a stride-4 map of 10x10 matched densely, projected to stride 1 (40x40)
    let corr = random_corr(&mut rng, 8, 8, 1, 3, 5);
    let fine = project_correspondence(&corr, 4, 1).unwrap();
    let refs = sample_patches(&common::random_map(&mut rng, 2, 12, 32), 12, 4).unwrap();
    assert_eq!(refs.len(), 6);
    let (_, cov) = assemble_swap_map(&fine, &refs, (2, 40, 40)).unwrap();
    assert!(cov.iter().all(|&n| n >= 1));
}

#[test]
fn score_map_takes_max_of_covering_patches() {
    let corr = CorrespondenceMap::new(2, 2, 1, 2, vec![0; 4], vec![0.1, 0.4, 0.3, 0.2]).unwrap();
    let s = score_map(&corr, 4, 3).unwrap();
    let want = [
        [0.1, 0.4, 0.4],
        [0.3, 0.4, 0.4],
        [0.3, 0.3, 0.2],
        [0.0, 0.0, 0.0],
    ];
    for y in 0..4 {
        for x in 0..3 {
            assert_eq!(s.get(0, y, x), want[y][x] as f32, "({y}, {x})");
        }
    }
}
