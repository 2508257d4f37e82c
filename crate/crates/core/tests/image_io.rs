mod common;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ntt_core::image::{keys_kernel, quantize, resize_bicubic, rotate, rotate_quarter_turns};
use ntt_core::{bicubic_resample, degrade_ref, load_image, save_image, Error, ImageBuffer};

fn write_png(path: &Path, w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) {
    let f = BufWriter::new(File::create(path).unwrap());
    let mut enc = png::Encoder::new(f, w, h);
    enc.set_color(color);
    enc.set_depth(depth);
    enc.write_header().unwrap().write_image_data(data).unwrap();
}

#[test]
fn white_png_loads_as_ones() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("white.png");
    write_png(&p, 2, 2, png::ColorType::Rgb, png::BitDepth::Eight, &[255; 12]);
    let img = load_image(&p).unwrap();
    assert_eq!((img.height(), img.width(), img.channels()), (2, 2, 3));
    assert!(img.data().iter().all(|&v| v == 1.0));
}

#[test]
fn byte_maps_to_v_over_255() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("gray.png");
    write_png(&p, 1, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[128]);
    let img = load_image(&p).unwrap();
    assert_eq!(img.channels(), 1);
    assert_eq!(img.data()[0], 128.0 / 255.0);
}

#[test]
fn channel_order_preserved() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rgb.png");
    write_png(&p, 1, 1, png::ColorType::Rgb, png::BitDepth::Eight, &[10, 20, 30]);
    let img = load_image(&p).unwrap();
    assert_eq!(img.data(), &[10.0 / 255.0, 20.0 / 255.0, 30.0 / 255.0]);
}

#[test]
fn truncated_file_is_decode_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.png");
    write_png(&p, 8, 8, png::ColorType::Rgb, png::BitDepth::Eight, &[7; 192]);
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load_image(&p), Err(Error::Decode { .. })));
}

#[test]
fn sixteen_bit_is_rejected_distinctly() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("deep.png");
    write_png(&p, 1, 1, png::ColorType::Grayscale, png::BitDepth::Sixteen, &[1, 2]);
    assert!(matches!(
        load_image(&p),
        Err(Error::UnsupportedBitDepth { depth: 16, .. })
    ));
    assert!(matches!(load_image(dir.path().join("nope.png")), Err(Error::Io { .. })));
}

#[test]
fn save_quantization() {
    assert_eq!(quantize(1.0), 255);
    assert_eq!(quantize(0.5), 128);
    assert_eq!(quantize(-0.2), 0);
    assert_eq!(quantize(1.7), 255);
}

#[test]
fn round_trip_every_byte_value() {
    let dir = tempfile::tempdir().unwrap();
    // every byte value, plus values between byte levels
    let data: Vec<f32> = (0..256 * 3)
        .map(|i| (i / 3) as f32 / 255.0 + (i % 3) as f32 * 0.0013)
        .map(|v| v.min(1.0))
        .collect();
    let img = ImageBuffer::new(16, 16, 3, data).unwrap();
    for ext in ["png", "ppm"] {
        let p = dir.path().join(format!("rt.{ext}"));
        save_image(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        assert!(common::max_abs_diff(img.data(), back.data()) <= 1.0 / 510.0 + 1e-7, "{ext}");
    }
    let exact = ImageBuffer::new(16, 16, 1, (0..256).map(|v| v as f32 / 255.0).collect()).unwrap();
    let p = dir.path().join("exact.pgm");
    save_image(&exact, &p).unwrap();
    assert_eq!(load_image(&p).unwrap(), exact);
}

#[test]
fn save_to_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let img = ImageBuffer::filled(2, 2, 3, 0.5);
    assert!(matches!(
        save_image(&img, dir.path().join("no/such/dir/x.png")),
        Err(Error::Io { .. })
    ));
}

/// Direct per-pixel bicubic with the same coordinate convention, no
/// separability.
fn bicubic_oracle(img: &ImageBuffer, oh: usize, ow: usize) -> ImageBuffer {
    let (h, w) = (img.height(), img.width());
    ImageBuffer::from_fn(oh, ow, img.channels(), |oy, ox, c| {
        let sy = (oy as f64 + 0.5) * h as f64 / oh as f64 - 0.5;
        let sx = (ox as f64 + 0.5) * w as f64 / ow as f64 - 0.5;
        let (fy, fx) = (sy.floor(), sx.floor());
        let mut acc = 0.0;
        let mut wsum_y = 0.0;
        for i in -1..=2 {
            let wy = keys_kernel(sy - (fy + i as f64));
            let yy = (fy as i64 + i).clamp(0, h as i64 - 1) as usize;
            let mut row = 0.0;
            let mut wsum_x = 0.0;
            for k in -1..=2 {
                let wx = keys_kernel(sx - (fx + k as f64));
                let xx = (fx as i64 + k).clamp(0, w as i64 - 1) as usize;
                row += wx * img.get(yy, xx, c) as f64;
                wsum_x += wx;
            }
            acc += wy * row / wsum_x;
            wsum_y += wy;
        }
        (acc / wsum_y) as f32
    })
}

#[test]
fn resize_matches_direct_oracle() {
    let mut rng = common::rng(11);
    for (h, w, oh, ow) in [(7, 9, 28, 36), (20, 16, 5, 4), (6, 6, 9, 13)] {
        let img = common::random_image(&mut rng, h, w, 3);
        let fast = resize_bicubic(&img, oh, ow).unwrap();
        let slow = bicubic_oracle(&img, oh, ow);
        assert!(common::max_abs_diff(fast.data(), slow.data()) < 1e-5);
    }
}

#[test]
fn resample_preserves_constants() {
    for f in [0.25, 0.5, 2.0, 4.0] {
        let out = bicubic_resample(&ImageBuffer::filled(24, 20, 3, 0.5), f).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.5).abs() <= 1e-6), "factor {f}");
    }
}

#[test]
fn degrade_is_composition_of_resamples() {
    let mut rng = common::rng(5);
    let img = common::random_image(&mut rng, 160, 160, 3);
    let composed = bicubic_resample(&bicubic_resample(&img, 0.25).unwrap(), 4.0).unwrap();
    let d = degrade_ref(&img, 4).unwrap();
    assert_eq!((d.height(), d.width()), (160, 160));
    assert_eq!(d.data(), composed.data());
}

#[test]
fn degrade_restores_odd_sizes() {
    let mut rng = common::rng(6);
    let img = common::random_image(&mut rng, 51, 37, 3);
    let d = degrade_ref(&img, 4).unwrap();
    assert_eq!((d.height(), d.width()), (51, 37));
    assert!(degrade_ref(&img, 1).is_err());
}

#[test]
fn right_angle_rotations_are_permutations() {
    let img = ImageBuffer::from_fn(3, 5, 1, |y, x, _| (y * 5 + x) as f32);
    let r = rotate(&img, 90.0).unwrap();
    assert_eq!(r, rotate_quarter_turns(&img, 1));
    assert_eq!((r.height(), r.width()), (5, 3));
    // counter-clockwise: the top-right input pixel lands top-left
    assert_eq!(r.get(0, 0, 0), img.get(0, 4, 0));
    assert_eq!(r.get(4, 2, 0), img.get(2, 0, 0));
    assert_eq!(rotate(&img, 360.0).unwrap(), img);
    assert_eq!(rotate(&rotate(&img, 180.0).unwrap(), 180.0).unwrap(), img);
}
