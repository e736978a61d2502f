use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const PBOW_BINS: usize = 128;

/// Persistence bag of words over unit codewords centred at `k + 0.5`.
///
/// With hard assignment to regular unit codewords the vectorization is a
/// histogram of death times: bin `k` holds deaths in `[k, k + 1)`. Deaths at or
/// beyond the last bin are counted in `overflow`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PBoWVector {
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl PBoWVector {
    pub fn zeros(bins: usize) -> Self {
        Self { counts: vec![0; bins], overflow: 0 }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

pub fn pbow<T: Real>(diagram: &PersistenceDiagram<T>) -> PBoWVector {
    pbow_with_bins(diagram, PBOW_BINS)
}

pub fn pbow_with_bins<T: Real>(diagram: &PersistenceDiagram<T>, bins: usize) -> PBoWVector {
    let mut v = PBoWVector::zeros(bins);
    let limit = bins as f64;
    for &(_, death) in &diagram.bars {
        let d = death.as_f64();
        if d < limit {
            v.counts[d.floor().max(0.0) as usize] += 1;
        } else {
            v.overflow += 1;
        }
    }
    v
}

/// CSV matrix: `patch_id`, one column per bin, then `overflow`.
pub fn write_pbow_csv(path: &Path, rows: &[(String, PBoWVector)]) -> Result<()> {
    let bins = rows.first().map_or(PBOW_BINS, |r| r.1.counts.len());
    let mut out = String::from("patch_id");
    for k in 0..bins {
        out.push_str(&format!(",b{k}"));
    }
    out.push_str(",overflow\n");
    for (id, v) in rows {
        out.push_str(id);
        for c in &v.counts {
            out.push_str(&format!(",{c}"));
        }
        out.push_str(&format!(",{}\n", v.overflow));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
