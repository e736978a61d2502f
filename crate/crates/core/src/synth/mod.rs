//! Synthetic microscopy: cell centers from a Thomas cluster process, cells
//! drawn as filled rotated ellipses on a noisy bright background.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{Manifest, ManifestRecord};
use crate::raster::{quantize, DepthConversion, ImageMeta, Raster, RawImage};

/// Normal distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dist {
    pub mean: f64,
    pub std: f64,
}

impl Dist {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.std == 0.0 {
            self.mean
        } else {
            Normal::new(self.mean, self.std).expect("validated std").sample(rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloneSpec {
    pub label: String,
    /// Cluster parents per square pixel.
    pub parent_intensity: f64,
    /// Mean offspring per parent (Poisson).
    pub offspring_mean: f64,
    /// Std of the Gaussian offspring displacement, pixels.
    pub scatter: f64,
    /// Major axis length, pixels.
    pub major: Dist,
    /// Minor/major axis ratio.
    pub roundness: Dist,
    /// Cell interior gray level.
    pub intensity: Dist,
    /// Background gray level; `std` is per-pixel noise everywhere.
    pub background: Dist,
    /// Minimum background gap between cells, pixels. `None` lets cells overlap.
    pub min_gap: Option<usize>,
}

impl CloneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("clone `{}`: {msg}", self.label)));
        let finite = [
            self.parent_intensity,
            self.offspring_mean,
            self.scatter,
            self.major.mean,
            self.major.std,
            self.roundness.mean,
            self.roundness.std,
            self.intensity.mean,
            self.intensity.std,
            self.background.mean,
            self.background.std,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.parent_intensity < 0.0 || self.offspring_mean < 0.0 || self.scatter < 0.0 {
            return bad("cluster parameters must be >= 0");
        }
        if [self.major.std, self.roundness.std, self.intensity.std, self.background.std].iter().any(|&s| s < 0.0) {
            return bad("standard deviations must be >= 0");
        }
        if self.major.mean <= 0.0 {
            return bad("major axis mean must be > 0");
        }
        if !(self.roundness.mean > 0.0 && self.roundness.mean <= 1.0) {
            return bad("roundness mean must be in (0, 1]");
        }
        for (name, d) in [("intensity", self.intensity), ("background", self.background)] {
            if !(0.0..=255.0).contains(&d.mean) {
                return bad(&format!("{name} mean must be in [0, 255]"));
            }
        }
        let coverage = self.expected_coverage();
        if coverage > 0.5 {
            return Err(Error::Overcrowded(coverage));
        }
        Ok(())
    }

    /// Expected fraction of the frame covered by cells, ignoring overlap.
    pub fn expected_coverage(&self) -> f64 {
        let mean_sq_major = self.major.mean.powi(2) + self.major.std.powi(2);
        let mean_area = PI / 4.0 * mean_sq_major * self.roundness.mean;
        self.parent_intensity * self.offspring_mean * mean_area
    }

    /// Copy with every mean scaled by an independent factor in `[1 - r, 1 + r]`.
    fn jittered(&self, r: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut f = || 1.0 + rng.random_range(-r..=r);
        let mut s = self.clone();
        s.parent_intensity *= f();
        s.offspring_mean *= f();
        s.scatter *= f();
        s.major.mean *= f();
        s.roundness.mean = (s.roundness.mean * f()).min(1.0);
        s.intensity.mean = (s.intensity.mean * f()).clamp(0.0, 255.0);
        s.background.mean = (s.background.mean * f()).clamp(0.0, 255.0);
        s
    }
}

/// Three clones with planted contrasts: A has the largest, roundest and
/// darkest cells; B the smallest and most dispersed; C the tightest clusters.
pub fn clone_presets() -> Vec<CloneSpec> {
    let base = |label: &str, major, roundness, intensity, scatter| CloneSpec {
        label: label.into(),
        parent_intensity: 3.0e-5,
        offspring_mean: 6.0,
        scatter,
        major: Dist::new(major, 1.5),
        roundness: Dist::new(roundness, 0.05),
        intensity: Dist::new(intensity, 6.0),
        background: Dist::new(200.0, 1.0),
        min_gap: Some(2),
    };
    vec![base("A", 22.0, 0.8, 110.0, 14.0), base("B", 17.0, 0.55, 160.0, 40.0), base("C", 19.0, 0.6, 135.0, 7.0)]
}

/// One generated cell. Coordinates use pixel centers at integer positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTruth {
    /// Index of the cluster parent that produced this cell.
    pub parent: usize,
    pub x: f64,
    pub y: f64,
    pub major: f64,
    pub minor: f64,
    /// Major-axis angle from the x axis, radians in `[0, π)`.
    pub angle: f64,
    pub intensity: f64,
    /// Number of rendered pixels inside the frame.
    pub pixels: usize,
}

impl CellTruth {
    pub fn visible(&self) -> bool {
        self.pixels > 0
    }

    pub fn area(&self) -> f64 {
        PI / 4.0 * self.major * self.minor
    }
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image: RawImage,
    pub cells: Vec<CellTruth>,
}

/// Renders one image. Parents are drawn on the frame grown by three scatter
/// lengths so clusters straddling the border are represented.
pub fn generate_image(spec: &CloneSpec, width: usize, height: usize, seed: u64) -> Result<SynthImage> {
    spec.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("image size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 3.0 * spec.scatter + spec.major.mean;
    let (ew, eh) = (width as f64 + 2.0 * margin, height as f64 + 2.0 * margin);
    let parents = poisson(spec.parent_intensity * ew * eh, &mut rng);
    let offset = Normal::new(0.0, spec.scatter.max(f64::MIN_POSITIVE)).expect("finite scatter");

    let mut canvas = vec![f64::NAN; width * height];
    let mut blocked = vec![false; width * height];
    let mut cells = Vec::new();
    for parent in 0..parents {
        let px = rng.random_range(0.0..ew) - margin;
        let py = rng.random_range(0.0..eh) - margin;
        let children = poisson(spec.offspring_mean, &mut rng);
        for _ in 0..children {
            let (dx, dy) = if spec.scatter == 0.0 {
                (0.0, 0.0)
            } else {
                (offset.sample(&mut rng), offset.sample(&mut rng))
            };
            let major = spec.major.sample(&mut rng).max(2.0);
            let minor = major * spec.roundness.sample(&mut rng).clamp(0.2, 1.0);
            let angle = rng.random_range(0.0..PI);
            let intensity = spec.intensity.sample(&mut rng).clamp(0.0, 255.0);
            let mut cell = CellTruth { parent, x: px + dx, y: py + dy, major, minor, angle, intensity, pixels: 0 };
            let footprint = ellipse_pixels(&cell, width, height);
            if let Some(gap) = spec.min_gap {
                if footprint.iter().any(|&i| blocked[i]) {
                    continue;
                }
                block(&mut blocked, &footprint, gap, width, height);
            }
            for &i in &footprint {
                canvas[i] = intensity;
            }
            cell.pixels = footprint.len();
            cells.push(cell);
        }
    }
    if spec.min_gap.is_none() {
        // Later cells may cover earlier ones.
        let mut owner = vec![usize::MAX; width * height];
        for (k, c) in cells.iter().enumerate() {
            for i in ellipse_pixels(c, width, height) {
                owner[i] = k;
            }
        }
        for c in cells.iter_mut() {
            c.pixels = 0;
        }
        for &k in owner.iter().filter(|&&k| k != usize::MAX) {
            cells[k].pixels += 1;
        }
    }
    let noise = spec.background.std;
    let data: Vec<f32> = canvas
        .iter()
        .map(|&v| {
            let base = if v.is_nan() { spec.background.mean } else { v };
            let n = if noise > 0.0 { Normal::new(0.0, noise).expect("finite").sample(&mut rng) } else { 0.0 };
            f32::from(quantize((base + n) as f32))
        })
        .collect();
    let pixels = Raster::new(width, height, data)?;
    let meta = ImageMeta {
        id: String::new(),
        source: String::new(),
        clone: spec.label.clone(),
        isolate: String::new(),
        preparation: String::new(),
        channels: 1,
        depth: DepthConversion::Native8,
    };
    Ok(SynthImage { image: RawImage { pixels, meta }, cells })
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> usize {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).expect("positive rate").sample(rng) as usize
    }
}

/// Frame pixels whose centers fall inside the cell's ellipse.
pub fn ellipse_pixels(c: &CellTruth, width: usize, height: usize) -> Vec<usize> {
    let (a, b) = (c.major / 2.0, c.minor / 2.0);
    let (sin, cos) = c.angle.sin_cos();
    let x0 = (c.x - a).floor().max(0.0);
    let x1 = (c.x + a).ceil().min(width as f64 - 1.0);
    let y0 = (c.y - a).floor().max(0.0);
    let y1 = (c.y + a).ceil().min(height as f64 - 1.0);
    let mut out = Vec::new();
    if x0 > x1 || y0 > y1 {
        return out;
    }
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            let (dx, dy) = (x as f64 - c.x, y as f64 - c.y);
            let u = (dx * cos + dy * sin) / a;
            let v = (-dx * sin + dy * cos) / b;
            if u * u + v * v <= 1.0 {
                out.push(y * width + x);
            }
        }
    }
    out
}

fn block(blocked: &mut [bool], footprint: &[usize], gap: usize, width: usize, height: usize) {
    for &i in footprint {
        let (x, y) = (i % width, i / width);
        for yy in y.saturating_sub(gap)..=(y + gap).min(height - 1) {
            for xx in x.saturating_sub(gap)..=(x + gap).min(width - 1) {
                blocked[yy * width + xx] = true;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub clones: Vec<CloneSpec>,
    pub isolates_per_clone: usize,
    pub preparations_per_isolate: usize,
    pub images_per_preparation: usize,
    pub width: usize,
    pub height: usize,
    /// Relative half-range of the per-isolate jitter on spec means.
    pub isolate_jitter: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            clones: clone_presets(),
            isolates_per_clone: 4,
            preparations_per_isolate: 2,
            images_per_preparation: 5,
            width: 512,
            height: 512,
            isolate_jitter: 0.05,
            seed: 0,
        }
    }
}

/// Everything needed to render one image of a dataset.
#[derive(Debug, Clone)]
pub struct ImageJob {
    pub record: ManifestRecord,
    pub spec: CloneSpec,
    pub seed: u64,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of stream `stream`: `splitmix64(global ^ splitmix64(stream << 32 | index))`.
pub fn derive_seed(global: u64, stream: u32, index: u64) -> u64 {
    splitmix64(global ^ splitmix64((u64::from(stream) << 32) | (index & 0xFFFF_FFFF)))
}

const ISOLATE_STREAM: u32 = 1;
const IMAGE_STREAM: u32 = 2;

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.preparations_per_isolate != 2 {
            return Err(Error::InvalidArgument("each isolate needs exactly 2 preparations".into()));
        }
        if self.clones.is_empty() || self.isolates_per_clone == 0 || self.images_per_preparation == 0 {
            return Err(Error::InvalidArgument("dataset needs clones, isolates and images".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("image size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.isolate_jitter) {
            return Err(Error::InvalidArgument("isolate jitter must be in [0, 1)".into()));
        }
        let mut labels: Vec<&str> = self.clones.iter().map(|c| c.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.clones.len() {
            return Err(Error::InvalidArgument("clone labels must be distinct".into()));
        }
        self.clones.iter().try_for_each(CloneSpec::validate)
    }

    /// Per-image jobs in manifest order. Image `k` (counting over clones,
    /// isolates, preparations, images) gets `derive_seed(seed, 2, k)`; isolate
    /// `j` draws its jitter from `derive_seed(seed, 1, j)`.
    pub fn plan(&self) -> Result<Vec<ImageJob>> {
        self.validate()?;
        let mut jobs = Vec::new();
        let mut isolate_index = 0u64;
        for clone in &self.clones {
            for iso in 0..self.isolates_per_clone {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, ISOLATE_STREAM, isolate_index));
                isolate_index += 1;
                let spec = clone.jittered(self.isolate_jitter, &mut rng);
                spec.validate()?;
                let isolate = format!("{}{}", clone.label, iso);
                for prep in 0..self.preparations_per_isolate {
                    for img in 0..self.images_per_preparation {
                        let id = format!("{isolate}_p{prep}_{img}");
                        jobs.push(ImageJob {
                            record: ManifestRecord {
                                path: format!("images/{id}.png"),
                                clone: clone.label.clone(),
                                isolate: isolate.clone(),
                                preparation: format!("p{prep}"),
                            },
                            spec: spec.clone(),
                            seed: derive_seed(self.seed, IMAGE_STREAM, jobs.len() as u64),
                        });
                    }
                }
            }
        }
        Ok(jobs)
    }
}

impl ImageJob {
    pub fn render(&self, width: usize, height: usize) -> Result<SynthImage> {
        let mut out = generate_image(&self.spec, width, height, self.seed)?;
        let meta = &mut out.image.meta;
        meta.id = self.record.image_id();
        meta.source = self.record.path.clone();
        meta.isolate = self.record.isolate.clone();
        meta.preparation = self.record.preparation.clone();
        Ok(out)
    }

    /// Writes the PNG and `truth/{id}.jsonl` under `dir`.
    pub fn write(&self, dir: &Path, image: &SynthImage) -> Result<()> {
        let png = dir.join(&self.record.path);
        if let Some(parent) = png.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        image.image.pixels.save_png(&png)?;
        let truth_dir = dir.join("truth");
        fs::create_dir_all(&truth_dir).map_err(|e| Error::io(&truth_dir, e))?;
        let path = truth_dir.join(format!("{}.jsonl", self.record.image_id()));
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        for c in &image.cells {
            writeln!(f, "{}", serde_json::to_string(c)?).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Renders and writes the whole dataset under `dir`: `images/*.png`,
/// `truth/*.jsonl` and `manifest.jsonl`.
pub fn generate_dataset(spec: &DatasetSpec, dir: &Path) -> Result<Manifest> {
    let jobs = spec.plan()?;
    for job in &jobs {
        let img = job.render(spec.width, spec.height)?;
        job.write(dir, &img)?;
    }
    write_manifest(dir, &jobs)
}

pub fn write_manifest(dir: &Path, jobs: &[ImageJob]) -> Result<Manifest> {
    let manifest = Manifest { root: dir.to_path_buf(), records: jobs.iter().map(|j| j.record.clone()).collect() };
    manifest.write(&dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

/// Reads `truth/{image_id}.jsonl` from a dataset directory.
pub fn read_truth(dir: &Path, image_id: &str) -> Result<Vec<CellTruth>> {
    let path = dir.join("truth").join(format!("{image_id}.jsonl"));
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    crate::manifest::parse_jsonl(&text)
}
