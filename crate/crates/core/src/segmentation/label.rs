use std::collections::VecDeque;

/// Binary mask over a raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_indices(width: usize, height: usize, idx: &[usize]) -> Self {
        let mut m = Self::empty(width, height);
        for &i in idx {
            m.bits[i] = true;
        }
        m
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Dilation with a `(2r+1)`×`(2r+1)` square structuring element.
    pub fn dilate(&self, r: usize) -> Mask {
        let (w, h) = (self.width, self.height);
        let mut rows = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if self.bits[y * w + x] {
                    let lo = x.saturating_sub(r);
                    let hi = (x + r).min(w - 1);
                    rows[y * w + lo..=y * w + hi].iter_mut().for_each(|b| *b = true);
                }
            }
        }
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if rows[y * w + x] {
                    for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                        out[yy * w + x] = true;
                    }
                }
            }
        }
        Mask { width: w, height: h, bits: out }
    }

    /// Erosion with a square structuring element; pixels outside count as set.
    pub fn erode(&self, r: usize) -> Mask {
        let inv = Mask { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() };
        let d = inv.dilate(r);
        Mask { width: self.width, height: self.height, bits: d.bits.iter().map(|b| !b).collect() }
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        }
    }

    /// Keep only the largest 8-connected component (lowest label on ties).
    pub fn largest_component(&self) -> Mask {
        let (labels, count) = connected_components(self);
        if count == 0 {
            return self.clone();
        }
        let mut sizes = vec![0usize; count as usize + 1];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        let mut best = 1;
        for l in 2..=count as usize {
            if sizes[l] > sizes[best] {
                best = l;
            }
        }
        Mask {
            width: self.width,
            height: self.height,
            bits: labels.iter().map(|&l| l as usize == best).collect(),
        }
    }
}

/// 8-connected component labeling. Labels are `1..=count` in raster order of
/// each component's first pixel; background is 0.
pub fn connected_components(mask: &Mask) -> (Vec<u32>, u32) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.bits[j] && labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (labels, next)
}
