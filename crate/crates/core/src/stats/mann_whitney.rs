use super::special::normal_cdf;
use super::{midranks, TestResult, EXACT_MAX_N};

/// Mann-Whitney U test, two-sided.
///
/// `U = min(U_a, U_b)` from midranks of the pooled sample. When the pooled
/// size is at most 12 the p-value is `P(min(U'_a, U'_b) <= U)` over all
/// `C(n, n_a)` equally likely label assignments; otherwise a continuity
/// corrected normal approximation with tie correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> TestResult {
    assert!(!a.is_empty() && !b.is_empty(), "both samples must be non-empty");
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let ua = ra - (na * (na + 1)) as f64 / 2.0;
    let prod = (na * nb) as f64;
    let u = ua.min(prod - ua);
    let n = na + nb;

    let (p, exact) = if n <= EXACT_MAX_N {
        let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r) as u64).collect();
        let dist = rank_sum_distribution(&doubled, na);
        let offset = (na * (na + 1)) as u64;
        let prod2 = 2 * (na * nb) as u64;
        let u2 = (2.0 * u) as u64;
        let mut hits = 0u64;
        let mut total = 0u64;
        for (s, &c) in dist.iter().enumerate() {
            if c == 0 {
                continue;
            }
            total += c;
            let ua2 = s as u64 - offset;
            if ua2.min(prod2 - ua2) <= u2 {
                hits += c;
            }
        }
        (hits as f64 / total as f64, true)
    } else {
        let nf = n as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
        let var = prod / 12.0 * ((nf + 1.0) - tie_term);
        if var <= 0.0 {
            (1.0, false)
        } else {
            let z = ((ua - prod / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
            ((2.0 * normal_cdf(-z)).min(1.0), false)
        }
    };
    TestResult {
        method: "mann_whitney_u".into(),
        statistic: u,
        p,
        n: vec![na, nb],
        exact,
        df: None,
        zeros_dropped: 0,
        degenerate: false,
    }
}

/// Number of size-`k` subsets of the doubled ranks reaching each doubled rank sum.
pub fn rank_sum_distribution(doubled_ranks: &[u64], k: usize) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let width = total as usize + 1;
    // table[j][s]: subsets of size j with sum s.
    let mut table = vec![vec![0u64; width]; k + 1];
    table[0][0] = 1;
    for &r in doubled_ranks {
        let r = r as usize;
        for j in (1..=k).rev() {
            let (lower, upper) = table.split_at_mut(j);
            let prev = &lower[j - 1];
            let cur = &mut upper[0];
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    table.swap_remove(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]);
        assert_eq!(r.statistic, 0.0);
        assert!(r.exact);
        assert!((r.p - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_multisets() {
        let a = [4.0, 1.0, 2.0, 2.0, 7.0];
        let r = mann_whitney_u(&a, &a);
        assert!(r.p >= 0.99);
        let big: Vec<f64> = (0..20).map(|i| (i % 7) as f64).collect();
        assert!(mann_whitney_u(&big, &big).p >= 0.99);
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = [0.3, 1.2, 5.5, 2.0];
        let b = [4.1, 6.0, 2.2, 9.9, 7.7, 0.1];
        assert_eq!(mann_whitney_u(&a, &b).p, mann_whitney_u(&b, &a).p);
        let big_a: Vec<f64> = (0..15).map(|i| i as f64 * 1.3).collect();
        let big_b: Vec<f64> = (0..11).map(|i| i as f64 * 1.9 + 2.0).collect();
        assert_eq!(mann_whitney_u(&big_a, &big_b).p, mann_whitney_u(&big_b, &big_a).p);
    }

    #[test]
    fn all_tied_pooled_sample() {
        let a = vec![3.0; 8];
        let b = vec![3.0; 9];
        assert_eq!(mann_whitney_u(&a, &b).p, 1.0);
    }
}
