use serde::{Deserialize, Serialize};

use super::PBoWVector;
use crate::error::{Error, Result};
use crate::stats::{ci_half_width, welch_t};

/// Per-bin mean of a clone's PBoW vectors with t-interval half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClonePBoWProfile {
    pub clone: String,
    pub mean: Vec<f64>,
    /// `None` when fewer than two vectors contributed.
    pub ci: Option<Vec<f64>>,
    pub n: usize,
}

pub fn average_pbow(clone: &str, vectors: &[PBoWVector], level: f64) -> Result<ClonePBoWProfile> {
    let first = vectors.first().ok_or_else(|| Error::TooFewSamples("no PBoW vectors to average".into()))?;
    let bins = first.counts.len();
    if vectors.iter().any(|v| v.counts.len() != bins) {
        return Err(Error::DimensionMismatch("PBoW vectors differ in bin count".into()));
    }
    let n = vectors.len();
    let columns: Vec<Vec<f64>> =
        (0..bins).map(|k| vectors.iter().map(|v| v.counts[k] as f64).collect()).collect();
    let mean = columns.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let ci = if n >= 2 {
        Some(columns.iter().map(|c| ci_half_width(c, level)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    Ok(ClonePBoWProfile { clone: clone.to_string(), mean, ci, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSignificance {
    pub pvalues: Vec<f64>,
    pub alpha: f64,
    pub significant_bins: Vec<usize>,
    /// Bins where both groups were constant at different values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate_bins: Vec<usize>,
}

/// Two-sided Welch t test per bin; bins with `p < alpha` are significant.
pub fn bin_significance(a: &[PBoWVector], b: &[PBoWVector], alpha: f64) -> Result<BinSignificance> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewSamples(format!(
            "bin significance needs >= 2 vectors per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let bins = a[0].counts.len();
    if a.iter().chain(b).any(|v| v.counts.len() != bins) {
        return Err(Error::DimensionMismatch("PBoW vectors differ in bin count".into()));
    }
    let mut pvalues = Vec::with_capacity(bins);
    let mut significant_bins = Vec::new();
    let mut degenerate_bins = Vec::new();
    for k in 0..bins {
        let xa: Vec<f64> = a.iter().map(|v| v.counts[k] as f64).collect();
        let xb: Vec<f64> = b.iter().map(|v| v.counts[k] as f64).collect();
        let r = welch_t(&xa, &xb)?;
        if r.degenerate {
            degenerate_bins.push(k);
        }
        if r.p < alpha {
            significant_bins.push(k);
        }
        pvalues.push(r.p);
    }
    Ok(BinSignificance { pvalues, alpha, significant_bins, degenerate_bins })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_with(bin: usize, value: u64) -> PBoWVector {
        let mut v = PBoWVector::zeros(128);
        v.counts[bin] = value;
        v
    }

    #[test]
    fn identical_vectors_zero_width() {
        let vs = vec![vec_with(3, 5); 4];
        let p = average_pbow("A", &vs, 0.99).unwrap();
        assert_eq!(p.mean[3], 5.0);
        assert!(p.ci.unwrap().iter().all(|&h| h == 0.0));
        assert_eq!(p.n, 4);
    }

    #[test]
    fn two_vector_mean() {
        let p = average_pbow("A", &[vec_with(0, 0), vec_with(0, 2)], 0.99).unwrap();
        assert_eq!(p.mean[0], 1.0);
        assert!(p.ci.unwrap()[0] > 0.0);
    }

    #[test]
    fn single_vector_has_no_interval() {
        let p = average_pbow("A", &[vec_with(1, 1)], 0.99).unwrap();
        assert!(p.ci.is_none());
        assert!(average_pbow("A", &[], 0.99).is_err());
    }

    #[test]
    fn identical_groups_have_no_significant_bins() {
        let g: Vec<PBoWVector> = (0..10).map(|i| vec_with(5, i % 3)).collect();
        let s = bin_significance(&g, &g, 0.01).unwrap();
        assert!(s.significant_bins.is_empty());
        assert_eq!(s.pvalues.len(), 128);
    }

    #[test]
    fn separated_bin_is_significant() {
        let a: Vec<PBoWVector> = (0..20).map(|i| vec_with(7, 10 + (i % 2))).collect();
        let b: Vec<PBoWVector> = (0..20).map(|i| vec_with(7, i % 2)).collect();
        let s = bin_significance(&a, &b, 0.01).unwrap();
        assert_eq!(s.significant_bins, vec![7]);
        let swapped = bin_significance(&b, &a, 0.01).unwrap();
        assert_eq!(s.pvalues, swapped.pvalues);
    }
}
