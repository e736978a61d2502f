use std::f64::consts::PI;

use crate::raster::Raster;
use crate::tiling::Patch;

pub const EMBEDDING_DIM: usize = 64;

const HIST_BINS: usize = 32;
const HIST_LOW: f64 = -4.0;
const HIST_HIGH: f64 = 4.0;
const ORIENTATION_BINS: usize = 9;
const POOL_ROWS: usize = 4;
const POOL_COLS: usize = 5;

/// Hand-crafted 64-dimensional descriptor of a normalized patch:
/// 32-bin intensity histogram over `[-4, 4)` (edge bins absorb outliers),
/// mean, std and skewness, a 9-bin magnitude-weighted gradient orientation
/// histogram, and 4×5 block means.
pub fn embed_patch(patch: &Patch) -> Vec<f64> {
    embed_raster(&patch.pixels)
}

pub(crate) fn embed_raster(r: &Raster) -> Vec<f64> {
    let mut out = Vec::with_capacity(EMBEDDING_DIM);
    let n = r.len() as f64;
    let px = r.pixels();

    let mut hist = [0.0; HIST_BINS];
    let width = (HIST_HIGH - HIST_LOW) / HIST_BINS as f64;
    for &v in px {
        let b = ((f64::from(v) - HIST_LOW) / width).floor();
        hist[b.clamp(0.0, (HIST_BINS - 1) as f64) as usize] += 1.0;
    }
    out.extend(hist.iter().map(|c| c / n));

    let mean = px.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &v in px {
        let d = f64::from(v) - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let std = (m2 / n).sqrt();
    let skew = if std > 1e-12 { (m3 / n) / std.powi(3) } else { 0.0 };
    out.extend([mean, std, skew]);

    let mut orient = [0.0; ORIENTATION_BINS];
    let (w, h) = (r.width(), r.height());
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let gx = f64::from(r.get(x + 1, y)) - f64::from(r.get(x - 1, y));
            let gy = f64::from(r.get(x, y + 1)) - f64::from(r.get(x, y - 1));
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).rem_euclid(PI);
            let b = ((angle / PI * ORIENTATION_BINS as f64) as usize).min(ORIENTATION_BINS - 1);
            orient[b] += mag;
        }
    }
    out.extend(orient.iter().map(|m| m / n));

    for gy in 0..POOL_ROWS {
        for gx in 0..POOL_COLS {
            let (y0, y1) = (gy * h / POOL_ROWS, (gy + 1) * h / POOL_ROWS);
            let (x0, x1) = (gx * w / POOL_COLS, (gx + 1) * w / POOL_COLS);
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += f64::from(r.get(x, y));
                }
            }
            let count = ((y1 - y0) * (x1 - x0)).max(1);
            out.push(sum / count as f64);
        }
    }
    out.resize(EMBEDDING_DIM, 0.0);
    out
}
