mod common;

use clonescope::raster::Raster;
use clonescope::segmentation::{otsu_threshold, refine_segment, region_properties, Mask, Segment};
use common::otsu_exhaustive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blank(w: usize, h: usize) -> Raster {
    Raster::filled(w, h, 100.0)
}

#[test]
fn rasterized_disks_are_round() {
    for r in [6.0, 9.5, 14.0, 25.0] {
        let mask = Mask::from_fn(80, 80, |x, y| (x as f64 - 40.0).powi(2) + (y as f64 - 40.0).powi(2) <= r * r);
        let p = region_properties(&mask, &blank(80, 80)).unwrap();
        assert!((p.roundness - 1.0).abs() <= 0.05, "r {r}: roundness {}", p.roundness);
    }
}

#[test]
fn rectangle_axis_ratio_is_side_ratio() {
    let mask = Mask::from_fn(60, 60, |x, y| (10..20).contains(&x) && (5..35).contains(&y));
    let p = region_properties(&mask, &blank(60, 60)).unwrap();
    assert!((p.major / p.minor - 3.0).abs() <= 0.15);
    assert!((p.roundness - 1.0 / 3.0).abs() <= 0.02);
    assert_eq!(p.area, 300.0);
}

fn bimodal(rng: &mut ChaCha8Rng, total: usize) -> [u64; 256] {
    let mut h = [0u64; 256];
    let lo = rng.random_range(10..110);
    let hi = rng.random_range(140..246);
    let (s1, s2) = (rng.random_range(1..12), rng.random_range(1..12));
    let w = rng.random_range(0.1..0.9);
    for _ in 0..total {
        let (c, s) = if rng.random_bool(w) { (lo, s1) } else { (hi, s2) };
        let v: i64 = c + rng.random_range(-s..=s);
        h[v.clamp(0, 255) as usize] += 1;
    }
    h
}

#[test]
fn otsu_matches_exhaustive_rational_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let n = rng.random_range(200..20_000);
        let h = bimodal(&mut rng, n);
        assert_eq!(otsu_threshold(&h).ok(), otsu_exhaustive(&h));
    }
}

#[test]
fn otsu_large_histograms_match_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10 {
        let mut h = bimodal(&mut rng, 5_000);
        h.iter_mut().for_each(|c| *c *= 101);
        assert!(h.iter().sum::<u64>() > 1 << 18);
        assert_eq!(otsu_threshold(&h).ok(), otsu_exhaustive(&h));
    }
}

#[test]
fn otsu_separates_documented_mixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut h = [0u64; 256];
    for _ in 0..10_000 {
        let v = if rng.random_bool(0.3) { 40 + rng.random_range(0..=5) } else { 180 + rng.random_range(0..=5) };
        h[v] += 1;
    }
    let t = otsu_threshold(&h).unwrap();
    assert!(t > 45 && t < 180, "t = {t}");
    assert_eq!(Some(t), otsu_exhaustive(&h));
}

#[test]
fn refined_soft_ellipse_area_within_ten_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..40 {
        let (b, extra) = (rng.random_range(7.0..12.0), rng.random_range(0.0..6.0));
        let a = b + extra;
        let (cx, cy) = (40.0 + rng.random_range(-2.0..2.0), 40.0 + rng.random_range(-2.0..2.0));
        let inside = |x: usize, y: usize| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            (dx * dx / (a * a) + dy * dy / (b * b)).sqrt()
        };
        let img = Raster::from_fn(80, 80, |x, y| {
            let t = (((inside(x, y) - 1.0) * b + 1.0) / 2.0).clamp(0.0, 1.0);
            (70.0 + t * 130.0) as f32
        });
        let truth = Mask::from_fn(80, 80, |x, y| inside(x, y) <= 1.0);
        let seg = Segment::from_pixels(1, truth.erode(2).indices(), 80, 80);
        let r = refine_segment(&img, &seg, 3);
        let area = truth.count() as f64;
        assert!((r.mask.count() as f64 - area).abs() / area < 0.10, "a {a} b {b} refined {} true {area}", r.mask.count());
    }
}

proptest! {
    #[test]
    fn otsu_property_matches_oracle(counts in prop::collection::vec(0u64..50, 256)) {
        let mut h = [0u64; 256];
        h.copy_from_slice(&counts);
        prop_assert_eq!(otsu_threshold(&h).ok(), otsu_exhaustive(&h));
    }

    #[test]
    fn rectangle_ratio_property(w in 2usize..30, h in 2usize..30) {
        let mask = Mask::from_fn(40, 40, |x, y| x < w && y < h);
        let p = region_properties(&mask, &blank(40, 40)).unwrap();
        let ratio = w.max(h) as f64 / w.min(h) as f64;
        prop_assert!((p.major / p.minor - ratio).abs() < 1e-9 * ratio);
        prop_assert!(p.roundness > 0.0 && p.roundness <= 1.0);
    }
}
