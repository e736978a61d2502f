//! Two-sided hypothesis tests and t-based confidence intervals.

mod ci;
mod mann_whitney;
pub mod special;
mod welch;
mod wilcoxon;

use serde::{Deserialize, Serialize};

pub use ci::{ci_half_width, ci_mean};
pub use mann_whitney::{mann_whitney_u, rank_sum_distribution};
pub use welch::welch_t;
pub use wilcoxon::{signed_rank_distribution, wilcoxon_signed_rank};

/// Largest sample size (pairs for Wilcoxon, pooled for Mann-Whitney) that
/// gets an exact enumerated p-value.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub n: Vec<usize>,
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    /// Zero paired differences dropped before ranking.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub zeros_dropped: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

/// Midranks (1-based) of `values`, plus the sizes of tie groups.
pub(crate) fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divide by `n - 1`).
pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
