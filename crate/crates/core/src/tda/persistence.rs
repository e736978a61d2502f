use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::segmentation::RegionProps;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    pub points: Vec<[T; 2]>,
    pub patch_id: String,
}

impl<T: Real> PointCloud<T> {
    pub fn new(patch_id: impl Into<String>, points: Vec<[T; 2]>) -> Self {
        Self { points, patch_id: patch_id.into() }
    }

    pub fn map(&self, f: impl Fn([T; 2]) -> [T; 2]) -> Self {
        Self { points: self.points.iter().map(|&p| f(p)).collect(), patch_id: self.patch_id.clone() }
    }
}

/// Finite H0 bars `(0, death)` of a distance filtration. The one component
/// that never dies is not stored; `essential` counts it.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram<T> {
    pub bars: Vec<(T, T)>,
    pub essential: usize,
    pub patch_id: String,
}

impl<T: Real> PersistenceDiagram<T> {
    pub fn deaths(&self) -> Vec<T> {
        self.bars.iter().map(|b| b.1).collect()
    }

    pub fn sorted_deaths(&self) -> Vec<T> {
        let mut d = self.deaths();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        d
    }
}

/// One point per segment, at its centroid, in segment order.
pub fn centers_point_cloud<T: Real>(patch_id: &str, props: &[RegionProps]) -> PointCloud<T> {
    PointCloud::new(patch_id, props.iter().map(|p| [T::of(p.centroid.0), T::of(p.centroid.1)]).collect())
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Dimension-0 persistence of the Euclidean distance filtration.
///
/// All pairwise edges are swept in ascending length (ties in lexicographic
/// `(i, j)` order) through a union-find; every merge at length `d` emits the
/// bar `(0, d)`. `N` points give `N - 1` bars.
pub fn h0_persistence<T: Real>(cloud: &PointCloud<T>) -> PersistenceDiagram<T> {
    let pts = &cloud.points;
    let n = pts.len();
    let mut edges: Vec<(T, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dx = pts[i][0] - pts[j][0];
            let dy = pts[i][1] - pts[j][1];
            edges.push(((dx * dx + dy * dy).sqrt(), i, j));
        }
    }
    edges.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    let mut sets = DisjointSet::new(n);
    let mut bars = Vec::with_capacity(n.saturating_sub(1));
    for (d, i, j) in edges {
        if sets.union(i, j) {
            bars.push((T::zero(), d));
            if bars.len() + 1 == n {
                break;
            }
        }
    }
    PersistenceDiagram { bars, essential: usize::from(n > 0), patch_id: cloud.patch_id.clone() }
}

/// `birth,death` CSV for one diagram.
pub fn write_diagram_csv<T: Real>(path: &Path, diagram: &PersistenceDiagram<T>) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut body = String::from("birth,death\n");
    for (b, d) in &diagram.bars {
        body.push_str(&format!("{b},{d}\n"));
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}
