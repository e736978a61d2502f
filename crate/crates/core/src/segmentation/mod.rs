//! Cell segmentation: global Otsu threshold, connected components, diameter
//! and border filtering, isolation test, boundary refinement and morphometry.
//!
//! Cells are dark on a bright background, so foreground is the side of the
//! threshold below it.

mod label;
mod otsu;
mod props;

use serde::{Deserialize, Serialize};

pub use label::{connected_components, Mask};
pub use otsu::otsu_threshold;
pub use props::{region_properties, RegionProps};

use crate::raster::{quantize, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub min_diameter: f64,
    pub max_diameter: f64,
    /// Square dilation radius for boundary refinement.
    pub dilation: usize,
    /// Gap used by the isolation test.
    pub gap: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self { min_diameter: 10.0, max_diameter: 40.0, dilation: 3, gap: 2 }
    }
}

/// Per-pixel labels, `0` for background and `1..=count` for segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: u32,
}

impl LabelMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, labels: vec![0; width * height], count: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: u32,
    /// Flat raster indices, ascending.
    pub pixels: Vec<usize>,
    /// Inclusive `(x0, y0, x1, y1)`.
    pub bbox: (usize, usize, usize, usize),
    pub touches_border: bool,
    pub equivalent_diameter: f64,
}

impl Segment {
    /// Segment over flat raster indices (ascending) of a `width`×`height` patch.
    pub fn from_pixels(label: u32, pixels: Vec<usize>, width: usize, height: usize) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for &i in &pixels {
            let (x, y) = (i % width, i / width);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let touches_border = x0 == 0 || y0 == 0 || x1 + 1 == width || y1 + 1 == height;
        let equivalent_diameter = 2.0 * (pixels.len() as f64 / std::f64::consts::PI).sqrt();
        Self { label, pixels, bbox: (x0, y0, x1, y1), touches_border, equivalent_diameter }
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn mask(&self, width: usize, height: usize) -> Mask {
        Mask::from_indices(width, height, &self.pixels)
    }
}

/// Dark-side mask of `patch` under its global Otsu threshold, or `None` when
/// the patch histogram is single-valued.
pub fn threshold_mask(patch: &Raster) -> Option<Mask> {
    let t = otsu_threshold(&patch.histogram()).ok()?;
    Some(Mask {
        width: patch.width(),
        height: patch.height(),
        bits: patch.pixels().iter().map(|&v| quantize(v) < t).collect(),
    })
}

/// Threshold, label, and keep components whose equivalent diameter lies in
/// `[dmin, dmax]` and which do not touch the raster border.
pub fn identify_primary_objects(patch: &Raster, dmin: f64, dmax: f64) -> (LabelMap, Vec<Segment>) {
    let (w, h) = (patch.width(), patch.height());
    let Some(mask) = threshold_mask(patch) else {
        return (LabelMap::empty(w, h), Vec::new());
    };
    let (raw, count) = connected_components(&mask);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); count as usize + 1];
    for (i, &l) in raw.iter().enumerate() {
        if l != 0 {
            groups[l as usize].push(i);
        }
    }
    let mut map = LabelMap::empty(w, h);
    let mut segments = Vec::new();
    for pixels in groups.into_iter().skip(1) {
        let candidate = Segment::from_pixels(0, pixels, w, h);
        let d = candidate.equivalent_diameter;
        if candidate.touches_border || d < dmin || d > dmax {
            continue;
        }
        let label = segments.len() as u32 + 1;
        for &i in &candidate.pixels {
            map.labels[i] = label;
        }
        segments.push(Segment { label, ..candidate });
    }
    map.count = segments.len() as u32;
    (map, segments)
}

/// Segments whose square dilation by `gap` touches no other segment.
pub fn isolated_segments<'a>(labels: &LabelMap, segments: &'a [Segment], gap: usize) -> Vec<&'a Segment> {
    let (w, h) = (labels.width, labels.height);
    segments
        .iter()
        .filter(|s| {
            s.pixels.iter().all(|&i| {
                let (x, y) = (i % w, i / w);
                (y.saturating_sub(gap)..=(y + gap).min(h - 1)).all(|yy| {
                    (x.saturating_sub(gap)..=(x + gap).min(w - 1)).all(|xx| {
                        let l = labels.labels[yy * w + xx];
                        l == 0 || l == s.label
                    })
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedMask {
    pub mask: Mask,
    /// True when the window histogram was degenerate and the original mask was kept.
    pub fallback: bool,
}

/// Re-threshold a segment inside its dilated neighbourhood: Otsu on the
/// window's pixels, dark side intersected with the window, largest component.
pub fn refine_segment(patch: &Raster, segment: &Segment, dilation: usize) -> RefinedMask {
    let (w, h) = (patch.width(), patch.height());
    let original = segment.mask(w, h);
    let window = original.dilate(dilation);
    let mut hist = [0u64; 256];
    for i in window.indices() {
        hist[quantize(patch.pixels()[i]) as usize] += 1;
    }
    let Ok(t) = otsu_threshold(&hist) else {
        return RefinedMask { mask: original, fallback: true };
    };
    let dark = Mask { width: w, height: h, bits: patch.pixels().iter().map(|&v| quantize(v) < t).collect() };
    let corrected = dark.and(&window).largest_component();
    if corrected.count() == 0 {
        return RefinedMask { mask: original, fallback: true };
    }
    RefinedMask { mask: corrected, fallback: false }
}

/// One row of the per-patch segment export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub patch_id: String,
    pub label: u32,
    pub area: f64,
    pub centroid: (f64, f64),
    pub major: f64,
    pub minor: f64,
    pub roundness: f64,
    pub mean_intensity: f64,
    pub isolated: bool,
    pub refined: bool,
}
