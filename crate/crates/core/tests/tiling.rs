mod common;

use clonescope::raster::Raster;
use clonescope::tiling::{foreground_filter, tile_raster, Patch, TilingParams};
use clonescope::synth::{clone_presets, generate_image, Dist};
use common::windows_by_walking;
use proptest::prelude::*;

#[test]
fn full_size_geometry_gives_286_patches() {
    let p = TilingParams { scale: 0.5, patch_size: 250, stride: 125 };
    assert_eq!(p.grid(3500, 5760), (windows_by_walking(2880, 250, 125), windows_by_walking(1750, 250, 125)));
    let (r, c) = p.grid(3500, 5760);
    assert_eq!(r * c, 286);
    let t = tile_raster(&Raster::filled(3500, 5760, 0.0), "big", &p).unwrap();
    assert_eq!(t.patches.len(), 286);
}

#[test]
fn checkerboard_rejected_and_sparse_cells_kept() {
    let board = Raster::from_fn(250, 250, |x, y| if (x + y) % 2 == 0 { 0.0 } else { 255.0 });
    let d = foreground_filter(&Patch::new("c", 0, 0, board), 1.5, 30.0);
    assert!((d.std - 127.5).abs() < 1e-9);
    assert!(!d.keep);

    let mut spec = clone_presets().remove(0);
    spec.parent_intensity = 1.5e-5;
    spec.intensity = Dist { mean: 150.0, std: 5.0 };
    let img = generate_image(&spec, 250, 250, 4).unwrap();
    let d = foreground_filter(&Patch::new("s", 0, 0, img.image.pixels.clone()), 1.5, 30.0);
    let px = img.image.pixels.pixels();
    let mean = px.iter().map(|&v| v as f64).sum::<f64>() / px.len() as f64;
    let std = (px.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / px.len() as f64).sqrt();
    assert!((d.std - std).abs() < 1e-6);
    assert!(d.std > 1.5 && d.std < 30.0, "std {}", d.std);
    assert!(d.keep);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn closed_form_count_matches_enumeration(w in 1usize..400, h in 1usize..400, scale in 0.05f64..=1.0,
                                             size in 1usize..120, stride in 1usize..120) {
        let p = TilingParams { scale, patch_size: size, stride };
        let (sw, sh) = ((w as f64 * scale).floor() as usize, (h as f64 * scale).floor() as usize);
        let expected = (windows_by_walking(sh, size, stride), windows_by_walking(sw, size, stride));
        prop_assert_eq!(p.grid(w, h), expected);
        let t = tile_raster(&Raster::filled(w, h, 1.0), "x", &p).unwrap();
        prop_assert_eq!(t.patches.len(), expected.0 * expected.1);
        prop_assert_eq!(t.warning.is_some(), t.patches.is_empty());
        prop_assert!(t.patches.iter().all(|q| q.pixels.width() == size && q.pixels.height() == size));
    }
}
