//! Grayscale rasters and image file IO.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major single-channel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width * height != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "raster {width}x{height} needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Copy of the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Raster {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop window out of bounds");
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
        }
        Raster { width: w, height: h, data }
    }

    /// Rotate by 180 degrees.
    pub fn rotate180(&self) -> Raster {
        let mut data = self.data.clone();
        data.reverse();
        Raster { width: self.width, height: self.height, data }
    }

    /// Bilinear resampling by `scale`. Output size is `floor(dim * scale)`;
    /// output pixel `(x, y)` samples the source at `((x + 0.5) / scale - 0.5, ...)`,
    /// so a factor of 0.5 averages each 2×2 block exactly.
    pub fn scale_bilinear(&self, scale: f64) -> Raster {
        if scale == 1.0 {
            return self.clone();
        }
        let ow = (self.width as f64 * scale).floor() as usize;
        let oh = (self.height as f64 * scale).floor() as usize;
        let xs: Vec<(usize, usize, f32)> = (0..ow).map(|x| sample_axis(x, scale, self.width)).collect();
        let mut data = Vec::with_capacity(ow * oh);
        for y in 0..oh {
            let (y0, y1, fy) = sample_axis(y, scale, self.height);
            for &(x0, x1, fx) in &xs {
                let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
                let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
                data.push(top * (1.0 - fy) + bottom * fy);
            }
        }
        Raster { width: ow, height: oh, data }
    }

    /// Population mean and standard deviation of all pixels.
    pub fn mean_std(&self) -> (f64, f64) {
        mean_std(self.data.iter().map(|&v| v as f64))
    }

    /// 256-bin histogram of intensities rounded and clamped into `[0, 255]`.
    pub fn histogram(&self) -> [u64; 256] {
        let mut h = [0u64; 256];
        for &v in &self.data {
            h[quantize(v) as usize] += 1;
        }
        h
    }

    /// Pixel values rounded and clamped to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.to_u8())
                .expect("buffer size matches raster");
        buf.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
    }
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn sample_axis(o: usize, scale: f64, len: usize) -> (usize, usize, f32) {
    let s = ((o as f64 + 0.5) / scale - 0.5).clamp(0.0, (len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, (s - i0 as f64) as f32)
}

/// Population mean and standard deviation (divide by N).
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// How the source file's samples were mapped into `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthConversion {
    Native8,
    Rescaled12,
    Rescaled16,
    Float,
}

/// Metadata recorded for a loaded image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub id: String,
    pub source: String,
    pub clone: String,
    pub isolate: String,
    pub preparation: String,
    pub channels: u8,
    pub depth: DepthConversion,
}

/// A loaded microscopy image, already reduced to grayscale in `[0, 255]`.
#[derive(Debug, Clone)]
pub struct RawImage {
    pub pixels: Raster,
    pub meta: ImageMeta,
}

const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

/// Load a PNG or TIFF file as grayscale. RGB is reduced with luma weights;
/// 16-bit containers holding at most 4095 are treated as 12-bit data.
pub fn load_grayscale(path: &Path) -> Result<(Raster, u8, DepthConversion)> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let out = match img {
        DynamicImage::ImageLuma8(b) => {
            (b.into_raw().into_iter().map(f32::from).collect(), 1, DepthConversion::Native8)
        }
        DynamicImage::ImageLumaA8(b) => {
            (b.pixels().map(|p| p.0[0] as f32).collect(), 1, DepthConversion::Native8)
        }
        DynamicImage::ImageRgb8(b) => (
            b.pixels().map(|p| luma(p.0[0] as f32, p.0[1] as f32, p.0[2] as f32)).collect(),
            3,
            DepthConversion::Native8,
        ),
        DynamicImage::ImageRgba8(b) => (
            b.pixels().map(|p| luma(p.0[0] as f32, p.0[1] as f32, p.0[2] as f32)).collect(),
            3,
            DepthConversion::Native8,
        ),
        DynamicImage::ImageLuma16(b) => {
            let raw: Vec<u16> = b.into_raw();
            let (factor, depth) = depth_factor(raw.iter().copied().max().unwrap_or(0));
            (raw.into_iter().map(|v| v as f32 * factor).collect(), 1, depth)
        }
        DynamicImage::ImageLumaA16(b) => {
            let raw: Vec<u16> = b.pixels().map(|p| p.0[0]).collect();
            let (factor, depth) = depth_factor(raw.iter().copied().max().unwrap_or(0));
            (raw.into_iter().map(|v| v as f32 * factor).collect(), 1, depth)
        }
        DynamicImage::ImageRgb16(b) => {
            let max = b.pixels().flat_map(|p| p.0).max().unwrap_or(0);
            let (factor, depth) = depth_factor(max);
            (
                b.pixels()
                    .map(|p| luma(p.0[0] as f32, p.0[1] as f32, p.0[2] as f32) * factor)
                    .collect(),
                3,
                depth,
            )
        }
        DynamicImage::ImageRgba16(b) => {
            let max = b.pixels().flat_map(|p| [p.0[0], p.0[1], p.0[2]]).max().unwrap_or(0);
            let (factor, depth) = depth_factor(max);
            (
                b.pixels()
                    .map(|p| luma(p.0[0] as f32, p.0[1] as f32, p.0[2] as f32) * factor)
                    .collect(),
                3,
                depth,
            )
        }
        other => {
            let rgb = other.to_rgb32f();
            (
                rgb.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2]).clamp(0.0, 1.0) * 255.0).collect(),
                3,
                DepthConversion::Float,
            )
        }
    };
    let (data, channels, depth) = out;
    Ok((Raster::new(w, h, data)?, channels, depth))
}

fn luma(r: f32, g: f32, b: f32) -> f32 {
    LUMA[0] * r + LUMA[1] * g + LUMA[2] * b
}

fn depth_factor(max: u16) -> (f32, DepthConversion) {
    if max <= 4095 {
        (255.0 / 4095.0, DepthConversion::Rescaled12)
    } else {
        (255.0 / 65535.0, DepthConversion::Rescaled16)
    }
}

/// Write integer labels as a 16-bit grayscale PNG (labels saturate at 65535).
pub fn save_label_png(path: &Path, width: usize, height: usize, labels: &[u32]) -> Result<()> {
    let raw: Vec<u16> = labels.iter().map(|&l| l.min(u16::MAX as u32) as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, raw).expect("label buffer size");
    buf.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}
