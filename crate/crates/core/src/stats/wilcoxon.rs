use super::special::normal_cdf;
use super::{midranks, TestResult, EXACT_MAX_N};
use crate::error::{Error, Result};

/// Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. `W = min(T+, T-)` with midranks for tied
/// magnitudes. For at most 12 non-zero pairs the p-value is
/// `P(min(T+, T-) <= W)` over all `2^n` equally likely sign patterns;
/// otherwise a continuity-corrected normal approximation with tie-corrected
/// variance is used.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "paired samples must have equal non-zero length, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let zeros_dropped = x.len() - diffs.len();
    if diffs.is_empty() {
        return Err(Error::DegeneratePairs);
    }
    let n = diffs.len();
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&magnitudes);
    let t_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = t_plus.min(total - t_plus);

    let (p, exact) = if n <= EXACT_MAX_N {
        let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r) as u64).collect();
        let counts = signed_rank_distribution(&doubled);
        let total2: u64 = doubled.iter().sum();
        let w2 = (2.0 * w) as u64;
        let hits: u64 = counts
            .iter()
            .enumerate()
            .filter(|&(s, _)| (s as u64).min(total2 - s as u64) <= w2)
            .map(|(_, &c)| c)
            .sum();
        (hits as f64 / (1u64 << n) as f64, true)
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let z = ((t_plus - mu).abs() - 0.5).max(0.0) / var.sqrt();
        ((2.0 * normal_cdf(-z)).min(1.0), false)
    };
    Ok(TestResult {
        method: "wilcoxon_signed_rank".into(),
        statistic: w,
        p,
        n: vec![n],
        exact,
        df: None,
        zeros_dropped,
        degenerate: false,
    })
}

/// Number of sign patterns giving each value of the doubled positive rank
/// sum, indexed by that sum.
pub fn signed_rank_distribution(doubled_ranks: &[u64]) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_equal_is_degenerate() {
        let x = [1.0, 2.0, 3.0];
        assert!(matches!(wilcoxon_signed_rank(&x, &x), Err(Error::DegeneratePairs)));
    }

    #[test]
    fn one_to_five_positive() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0; 5];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(r.exact);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p, 1.0 / 16.0);
        // One-sided: only the all-positive pattern reaches T+ = 15.
        let counts = signed_rank_distribution(&[2, 4, 6, 8, 10]);
        assert_eq!(counts[30] as f64 / 32.0, 1.0 / 32.0);
    }

    #[test]
    fn zeros_are_recorded() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 5.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.zeros_dropped, 1);
        assert_eq!(r.n, vec![2]);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
        assert!(wilcoxon_signed_rank(&[], &[]).is_err());
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.37 + ((i * 7) % 5) as f64).collect();
        let y: Vec<f64> = (0..30).map(|i| i as f64 * 0.35).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(!r.exact);
        assert!((0.0..=1.0).contains(&r.p));
    }
}
