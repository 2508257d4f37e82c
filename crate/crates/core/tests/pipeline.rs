mod common;

use ntt_core::features::random_network_weights;
use ntt_core::swap::{augment_references, AugmentConfig};
use ntt_core::{
    bicubic_resample, extract_pyramid, swap_pipeline, Error, ImageBuffer, NetworkConfig,
    SwapConfig, SwappedPyramid, WeightStore,
};

fn setup() -> (NetworkConfig, WeightStore) {
    let net = NetworkConfig::vgg19().through("relu3_1").unwrap();
    let w = random_network_weights(&net, 1).unwrap();
    (net, w)
}

#[test]
fn shapes_for_40x40_lr_and_160x160_ref() {
    let (net, w) = setup();
    let mut rng = common::rng(20);
    let hr = common::scene(&mut rng, 160, 160);
    let lr = bicubic_resample(&hr, 0.25).unwrap();
    let reference = common::scene(&mut rng, 160, 160);
    let pyr = swap_pipeline(&lr, &[reference], &w, &net, &SwapConfig::default()).unwrap();
    assert_eq!(pyr.correspondence().unwrap().grid(), (38, 38));
    let lr_up = bicubic_resample(&lr, 4.0).unwrap();
    let feats = extract_pyramid(&lr_up, &w, &net, &["relu3_1", "relu2_1", "relu1_1"]).unwrap();
    let names: Vec<&str> = pyr.layers().iter().map(|l| l.layer()).collect();
    assert_eq!(names, ["relu3_1", "relu2_1", "relu1_1"]);
    for (layer, f) in pyr.layers().iter().zip(&feats) {
        assert_eq!(layer.swapped.shape(), f.shape());
        assert_eq!(layer.swapped.stride(), f.stride());
        assert_eq!(layer.weight.shape(), (1, f.height(), f.width()));
        assert!(layer.weight.data().iter().all(|v| v.is_finite()));
        // dense matching covers every cell at every level
        assert!(layer.coverage.as_ref().unwrap().iter().all(|&n| n > 0));
    }
    // weight maps carry the same scores at every level
    let coarse = pyr.layers()[0].mean_weight();
    for l in pyr.layers() {
        assert!((l.mean_weight() - coarse).abs() < 1e-3 * coarse.abs().max(1.0));
    }
}

#[test]
fn sisr_fallback_completes() {
    let (net, w) = setup();
    let lr = common::scene(&mut common::rng(21), 40, 40);
    let self_ref = bicubic_resample(&lr, 4.0).unwrap();
    let pyr = swap_pipeline(&lr, &[self_ref], &w, &net, &SwapConfig::default()).unwrap();
    assert_eq!(pyr.layer("relu3_1").unwrap().swapped.shape(), (256, 40, 40));
}

#[test]
fn pipeline_is_deterministic_and_serializes() {
    let (net, w) = setup();
    let mut rng = common::rng(22);
    let lr = common::scene(&mut rng, 24, 28);
    let r = common::scene(&mut rng, 64, 72);
    let a = swap_pipeline(&lr, &[r.clone()], &w, &net, &SwapConfig::default()).unwrap();
    let b = swap_pipeline(&lr, &[r], &w, &net, &SwapConfig::default()).unwrap();
    assert_eq!(a, b);
    let store = a.to_weight_store().unwrap();
    assert_eq!(store.len(), 6);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.nttw");
    a.save(&p).unwrap();
    let back = SwappedPyramid::load(&p).unwrap();
    for (x, y) in a.layers().iter().zip(back.layers()) {
        assert_eq!(x.swapped.shape(), y.swapped.shape());
        assert_eq!(x.swapped.data(), y.swapped.data());
        assert_eq!(x.weight.data(), y.weight.data());
        assert_eq!(x.swapped.stride(), y.swapped.stride());
        assert_eq!(x.layer(), y.layer());
    }
}

#[test]
fn multiple_references_share_one_index_space() {
    let (net, w) = setup();
    let mut rng = common::rng(23);
    let lr = common::scene(&mut rng, 20, 20);
    let refs = vec![common::scene(&mut rng, 48, 48), common::scene(&mut rng, 40, 56)];
    let cfg = SwapConfig {
        augment: AugmentConfig {
            scales: vec![1.0, 2.0],
            rotations: vec![0.0, 90.0],
        },
        ..SwapConfig::default()
    };
    let pyr = swap_pipeline(&lr, &refs, &w, &net, &cfg).unwrap();
    let v = pyr.variants();
    assert_eq!(v.len(), 8);
    assert!(v.windows(2).all(|p| p[1].first_patch == p[0].first_patch + p[0].patches));
    assert_eq!(v[0].patches, 10 * 10);
    let corr = pyr.correspondence().unwrap();
    let total = v.last().map(|x| x.first_patch + x.patches).unwrap();
    for &j in corr.best_index() {
        assert!(j < total);
        let (ri, vi, k) = pyr.locate(j).unwrap();
        assert_eq!(v[vi].ref_index, ri);
        assert!(k < v[vi].patches);
    }
    assert_eq!(pyr.locate(total), None);
}

#[test]
fn exact_source_scores_above_noise() {
    let (net, w) = setup();
    let mut rng = common::rng(24);
    let hr = common::scene(&mut rng, 64, 64);
    let lr = bicubic_resample(&hr, 0.25).unwrap();
    let noise = common::random_image(&mut rng, 64, 64, 3);
    let cfg = SwapConfig::default();
    let own = swap_pipeline(&lr, &[hr], &w, &net, &cfg).unwrap();
    let other = swap_pipeline(&lr, &[noise], &w, &net, &cfg).unwrap();
    assert!(own.layers()[0].mean_weight() > other.layers()[0].mean_weight());
}

#[test]
fn small_or_missing_references_fail() {
    let (net, w) = setup();
    let lr = ImageBuffer::filled(16, 16, 3, 0.5);
    let cfg = SwapConfig::default();
    assert!(matches!(swap_pipeline(&lr, &[], &w, &net, &cfg), Err(Error::Empty(_))));
    let refs = [ImageBuffer::filled(64, 64, 3, 0.2), ImageBuffer::filled(8, 30, 3, 0.2)];
    assert!(matches!(
        swap_pipeline(&lr, &refs, &w, &net, &cfg),
        Err(Error::ReferenceTooSmall { index: 1 })
    ));
}

#[test]
fn grayscale_inputs_are_promoted() {
    let (net, w) = setup();
    let lr = ImageBuffer::from_fn(12, 12, 1, |y, x, _| ((y + x) % 5) as f32 / 5.0);
    let r = ImageBuffer::from_fn(48, 48, 1, |y, x, _| ((y * x) % 7) as f32 / 7.0);
    assert!(swap_pipeline(&lr, &[r], &w, &net, &SwapConfig::default()).is_ok());
}

#[test]
fn augmentation_counts() {
    let img = common::scene(&mut common::rng(25), 40, 40);
    let out = augment_references(&[img.clone()], &[1.0], &[0.0]).unwrap();
    assert_eq!(out, vec![img.clone()]);
    let out = augment_references(&[img.clone()], &[0.5, 1.0, 2.0], &[0.0, 90.0]).unwrap();
    assert_eq!(out.len(), 6);
    assert_eq!(out[0], img);
    assert!(augment_references(&[], &[1.0], &[0.0]).is_err());
    assert!(augment_references(&[img], &[0.0], &[0.0]).is_err());
}

#[test]
fn swap_config_json_defaults() {
    let cfg: SwapConfig = serde_json::from_str(r#"{"patch_size": 5}"#).unwrap();
    assert_eq!(cfg.patch_size, 5);
    assert_eq!(cfg.match_layer, "relu3_1");
    assert_eq!(cfg.augment.scales, vec![1.0]);
}
