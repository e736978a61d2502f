//! Sliding-window patch extraction, foreground filtering and intensity
//! normalization.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Raster, RawImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TilingParams {
    pub scale: f64,
    pub patch_size: usize,
    pub stride: usize,
}

impl Default for TilingParams {
    fn default() -> Self {
        Self { scale: 0.5, patch_size: 250, stride: 125 }
    }
}

impl TilingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::InvalidArgument(format!("scale must be in (0, 1], got {}", self.scale)));
        }
        if self.stride == 0 || self.patch_size == 0 {
            return Err(Error::InvalidArgument("stride and patch size must be >= 1".into()));
        }
        Ok(())
    }

    /// Scaled raster dimensions for a `width`×`height` source.
    pub fn scaled_dims(&self, width: usize, height: usize) -> (usize, usize) {
        (
            (width as f64 * self.scale).floor() as usize,
            (height as f64 * self.scale).floor() as usize,
        )
    }

    /// Number of full windows `(rows, cols)` on a `width`×`height` source image.
    pub fn grid(&self, width: usize, height: usize) -> (usize, usize) {
        let (w, h) = self.scaled_dims(width, height);
        (windows(h, self.patch_size, self.stride), windows(w, self.patch_size, self.stride))
    }
}

fn windows(len: usize, size: usize, stride: usize) -> usize {
    if len < size {
        0
    } else {
        (len - size) / stride + 1
    }
}

/// One square window cut from a scaled image.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image_id: String,
    pub row: usize,
    pub col: usize,
    pub pixels: Raster,
    pub foreground: bool,
    pub normalized: bool,
}

impl Patch {
    pub fn new(image_id: impl Into<String>, row: usize, col: usize, pixels: Raster) -> Self {
        Self { image_id: image_id.into(), row, col, pixels, foreground: false, normalized: false }
    }

    pub fn id(&self) -> String {
        patch_id(&self.image_id, self.row, self.col)
    }
}

pub fn patch_id(image_id: &str, row: usize, col: usize) -> String {
    format!("{image_id}_r{row}_c{col}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tiling {
    pub patches: Vec<Patch>,
    /// Set when the scaled image cannot hold a single window.
    pub warning: Option<String>,
}

pub fn tile_image(image: &RawImage, params: &TilingParams) -> Result<Tiling> {
    tile_raster(&image.pixels, &image.meta.id, params)
}

/// Scale `raster` and cut it into full windows in row-major order. Partial
/// windows at the borders are dropped.
pub fn tile_raster(raster: &Raster, image_id: &str, params: &TilingParams) -> Result<Tiling> {
    params.validate()?;
    let (rows, cols) = params.grid(raster.width(), raster.height());
    if rows == 0 || cols == 0 {
        let (w, h) = params.scaled_dims(raster.width(), raster.height());
        let msg = format!(
            "image `{image_id}` is {w}x{h} after scaling, smaller than one {0}x{0} patch",
            params.patch_size
        );
        log::warn!("{msg}");
        return Ok(Tiling { patches: Vec::new(), warning: Some(msg) });
    }
    let scaled = raster.scale_bilinear(params.scale);
    let s = params.patch_size;
    let mut patches = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let px = scaled.crop(c * params.stride, r * params.stride, s, s);
            patches.push(Patch::new(image_id, r, c, px));
        }
    }
    Ok(Tiling { patches, warning: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForegroundFilter {
    pub low: f64,
    pub high: f64,
}

impl Default for ForegroundFilter {
    fn default() -> Self {
        Self { low: 1.5, high: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForegroundDecision {
    pub keep: bool,
    pub std: f64,
}

/// Keep a patch iff `low <= std <= high` (population std of its intensities).
pub fn foreground_filter(patch: &Patch, low: f64, high: f64) -> ForegroundDecision {
    let (_, std) = patch.pixels.mean_std();
    ForegroundDecision { keep: low <= std && std <= high, std }
}

impl ForegroundFilter {
    pub fn apply(&self, patch: &mut Patch) -> ForegroundDecision {
        let d = foreground_filter(patch, self.low, self.high);
        patch.foreground = d.keep;
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
    /// Patches actually sampled.
    pub sample_size: usize,
    pub requested: usize,
    pub seed: u64,
}

/// Mean and population std over every pixel of `n` patches drawn without
/// replacement (all of them when fewer than `n` exist).
pub fn compute_norm_stats(patches: &[&Patch], n: usize, seed: u64) -> Result<NormStats> {
    if patches.is_empty() {
        return Err(Error::NoForeground);
    }
    let mut idx: Vec<usize> = if patches.len() <= n {
        (0..patches.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, patches.len(), n).into_vec()
    };
    idx.sort_unstable();
    let mut count = 0usize;
    let mut sum = 0.0f64;
    for &i in &idx {
        count += patches[i].pixels.len();
        sum += patches[i].pixels.pixels().iter().map(|&v| v as f64).sum::<f64>();
    }
    let mean = sum / count as f64;
    let mut ss = 0.0f64;
    for &i in &idx {
        ss += patches[i].pixels.pixels().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>();
    }
    let std = (ss / count as f64).sqrt();
    if !(std > 0.0) {
        return Err(Error::DegenerateStd);
    }
    Ok(NormStats { mean, std, sample_size: idx.len(), requested: n, seed })
}

pub fn normalize_patch(patch: &Patch, stats: &NormStats) -> Result<Patch> {
    if !(stats.std > 0.0) {
        return Err(Error::DegenerateStd);
    }
    let mut out = patch.clone();
    for v in out.pixels.pixels_mut() {
        *v = ((*v as f64 - stats.mean) / stats.std) as f32;
    }
    out.normalized = true;
    Ok(out)
}

pub fn denormalize_patch(patch: &Patch, stats: &NormStats) -> Patch {
    let mut out = patch.clone();
    for v in out.pixels.pixels_mut() {
        *v = (*v as f64 * stats.std + stats.mean) as f32;
    }
    out.normalized = false;
    out
}

/// One row of the patch store index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchIndexRecord {
    pub patch_id: String,
    pub image_id: String,
    pub row: usize,
    pub col: usize,
    pub foreground: bool,
    pub std: f64,
}

/// Write every patch as `{patch_id}.png` into `dir` and append index rows to
/// `index.jsonl`.
pub fn write_patch_store(dir: &Path, entries: &[(Patch, ForegroundDecision)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let index_path = dir.join("index.jsonl");
    let mut index = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&index_path)
        .map_err(|e| Error::io(&index_path, e))?;
    for (p, d) in entries {
        let id = p.id();
        p.pixels.save_png(&dir.join(format!("{id}.png")))?;
        let rec = PatchIndexRecord {
            patch_id: id,
            image_id: p.image_id.clone(),
            row: p.row,
            col: p.col,
            foreground: d.keep,
            std: d.std,
        };
        writeln!(index, "{}", serde_json::to_string(&rec)?).map_err(|e| Error::io(&index_path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, |x, y| ((x * 7 + y * 13) % 256) as f32)
    }

    #[test]
    fn full_size_paper_geometry() {
        let p = TilingParams::default();
        assert_eq!(p.grid(5760, 3500), (13, 22));
    }

    #[test]
    fn exact_fit_gives_one_patch() {
        let p = TilingParams { scale: 1.0, patch_size: 250, stride: 125 };
        let t = tile_raster(&raster(250, 250), "img", &p).unwrap();
        assert_eq!(t.patches.len(), 1);
        assert!(t.warning.is_none());
        assert_eq!(t.patches[0].id(), "img_r0_c0");
    }

    #[test]
    fn too_small_is_empty_with_warning() {
        let p = TilingParams { scale: 1.0, patch_size: 250, stride: 125 };
        let t = tile_raster(&raster(500, 249), "img", &p).unwrap();
        assert!(t.patches.is_empty());
        assert!(t.warning.is_some());
    }

    #[test]
    fn windows_are_exact_crops_in_row_major_order() {
        let p = TilingParams { scale: 1.0, patch_size: 20, stride: 7 };
        let r = raster(61, 45);
        let t = tile_raster(&r, "x", &p).unwrap();
        let (rows, cols) = p.grid(61, 45);
        assert_eq!(t.patches.len(), rows * cols);
        for (k, patch) in t.patches.iter().enumerate() {
            assert_eq!((patch.row, patch.col), (k / cols, k % cols));
            for y in 0..20 {
                for x in 0..20 {
                    assert_eq!(patch.pixels.get(x, y), r.get(patch.col * 7 + x, patch.row * 7 + y));
                }
            }
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let r = raster(10, 10);
        assert!(tile_raster(&r, "x", &TilingParams { scale: 0.0, patch_size: 5, stride: 1 }).is_err());
        assert!(tile_raster(&r, "x", &TilingParams { scale: 1.5, patch_size: 5, stride: 1 }).is_err());
        assert!(tile_raster(&r, "x", &TilingParams { scale: 1.0, patch_size: 5, stride: 0 }).is_err());
    }

    #[test]
    fn filter_rejects_constant_and_checkerboard() {
        let constant = Patch::new("c", 0, 0, Raster::filled(250, 250, 90.0));
        let d = foreground_filter(&constant, 1.5, 30.0);
        assert!(!d.keep);
        assert_eq!(d.std, 0.0);

        let board = Patch::new("b", 0, 0, Raster::from_fn(250, 250, |x, y| if (x + y) % 2 == 0 { 0.0 } else { 255.0 }));
        let d = foreground_filter(&board, 1.5, 30.0);
        assert!(!d.keep);
        assert!((d.std - 127.5).abs() < 1e-9);
    }

    #[test]
    fn norm_stats_two_point_population() {
        let a = Patch::new("a", 0, 0, Raster::filled(1, 1, 0.0));
        let b = Patch::new("b", 0, 0, Raster::filled(1, 1, 2.0));
        let s = compute_norm_stats(&[&a, &b], 10000, 7).unwrap();
        assert_eq!((s.mean, s.std, s.sample_size), (1.0, 1.0, 2));
    }

    #[test]
    fn norm_stats_errors() {
        assert!(matches!(compute_norm_stats(&[], 10, 0), Err(Error::NoForeground)));
        let a = Patch::new("a", 0, 0, Raster::filled(3, 3, 100.0));
        assert!(matches!(compute_norm_stats(&[&a, &a], 10, 0), Err(Error::DegenerateStd)));
    }

    #[test]
    fn norm_stats_sampling_is_seeded() {
        let patches: Vec<Patch> = (0..40)
            .map(|i| Patch::new("p", i, 0, Raster::from_fn(4, 4, |x, y| (i * 3 + x + y) as f32)))
            .collect();
        let refs: Vec<&Patch> = patches.iter().collect();
        let a = compute_norm_stats(&refs, 10, 11).unwrap();
        let b = compute_norm_stats(&refs, 10, 11).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std.to_bits(), b.std.to_bits());
        assert_eq!(a.sample_size, 10);
    }

    #[test]
    fn normalize_values_and_degenerate() {
        let p = Patch::new("p", 0, 0, Raster::new(2, 1, vec![100.0, 120.0]).unwrap());
        let stats = NormStats { mean: 100.0, std: 10.0, sample_size: 1, requested: 1, seed: 0 };
        let n = normalize_patch(&p, &stats).unwrap();
        assert_eq!(n.pixels.pixels(), &[0.0, 2.0]);
        assert!(n.normalized);
        let bad = NormStats { std: 0.0, ..stats };
        assert!(matches!(normalize_patch(&p, &bad), Err(Error::DegenerateStd)));
    }

    #[test]
    fn patch_store_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = Patch::new("img", 1, 2, Raster::filled(4, 4, 10.0));
        let d = foreground_filter(&p, 1.5, 30.0);
        write_patch_store(dir.path(), &[(p, d)]).unwrap();
        assert!(dir.path().join("img_r1_c2.png").exists());
        let idx = fs::read_to_string(dir.path().join("index.jsonl")).unwrap();
        let rec: PatchIndexRecord = serde_json::from_str(idx.trim()).unwrap();
        assert_eq!(rec.patch_id, "img_r1_c2");
        assert!(!rec.foreground);
    }
}
