use serde::{Deserialize, Serialize};

use super::label::Mask;
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Morphometry of one cell mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionProps {
    pub area: f64,
    /// `(x, y)` in pixel coordinates, pixel centers at integer positions.
    pub centroid: (f64, f64),
    pub major: f64,
    pub minor: f64,
    /// `minor / major`, in `(0, 1]`.
    pub roundness: f64,
    pub mean_intensity: f64,
    /// Angle of the major axis from the x axis, radians.
    pub orientation: f64,
}

/// Area, centroid and moment-matched ellipse of `mask`.
///
/// Each pixel is a unit square, so its own variance of 1/12 is added to both
/// second moments. An `a`×`b` rectangle then has axis lengths with ratio
/// exactly `a/b`, and a single pixel still gets a positive minor axis.
pub fn region_properties(mask: &Mask, patch: &Raster) -> Result<RegionProps> {
    let idx = mask.indices();
    if idx.is_empty() {
        return Err(Error::EmptyMask);
    }
    let w = mask.width;
    let n = idx.len() as f64;
    let (mut sx, mut sy, mut si) = (0.0, 0.0, 0.0);
    for &i in &idx {
        sx += (i % w) as f64;
        sy += (i / w) as f64;
        si += patch.pixels()[i] as f64;
    }
    let (cx, cy) = (sx / n, sy / n);
    let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
    for &i in &idx {
        let dx = (i % w) as f64 - cx;
        let dy = (i / w) as f64 - cy;
        mxx += dx * dx;
        myy += dy * dy;
        mxy += dx * dy;
    }
    mxx = mxx / n + 1.0 / 12.0;
    myy = myy / n + 1.0 / 12.0;
    mxy /= n;
    let half_trace = 0.5 * (mxx + myy);
    let disc = (0.25 * (mxx - myy).powi(2) + mxy * mxy).sqrt();
    let l1 = half_trace + disc;
    let l2 = (half_trace - disc).max(f64::MIN_POSITIVE);
    let major = 4.0 * l1.sqrt();
    let minor = 4.0 * l2.sqrt();
    Ok(RegionProps {
        area: n,
        centroid: (cx, cy),
        major,
        minor,
        roundness: (minor / major).min(1.0),
        mean_intensity: si / n,
        orientation: 0.5 * (2.0 * mxy).atan2(mxx - myy),
    })
}
