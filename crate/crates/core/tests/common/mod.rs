//! Brute-force reference implementations shared by the integration tests and
//! the acceptance suite. None of them call into the library.
#![allow(dead_code)]

use num::{BigInt, BigRational};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Edge lengths of a Euclidean minimum spanning tree (Prim, O(N²)), sorted.
pub fn prim_mst_lengths(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let dist = |i: usize, j: usize| {
        let (dx, dy) = (points[i][0] - points[j][0], points[i][1] - points[j][1]);
        (dx * dx + dy * dy).sqrt()
    };
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = dist(0, j);
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let next = (0..n).filter(|&j| !in_tree[j]).min_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        edges.push(best[next]);
        in_tree[next] = true;
        for j in 0..n {
            if !in_tree[j] {
                best[j] = best[j].min(dist(next, j));
            }
        }
    }
    edges.sort_by(f64::total_cmp);
    edges
}

/// Midranks by sorting with explicit tie groups.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided signed-rank p-value by enumerating all 2^n sign patterns of the
/// non-zero differences: `P(min(T+, T-) <= W_obs)`.
pub fn wilcoxon_enumeration_p(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    let ranks = midranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let total: f64 = ranks.iter().sum();
    let t_obs: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let w_obs = t_obs.min(total - t_obs);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let t: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if t.min(total - t) <= w_obs {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

/// Two-sided Mann-Whitney p-value by enumerating every assignment of
/// `|a|` labels among the pooled sample: `P(min(U, n_a n_b - U) <= U_obs)`.
pub fn mann_whitney_enumeration_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let (na, nb) = (a.len(), b.len());
    let ranks = midranks(&pooled);
    let offset = (na * (na + 1)) as f64 / 2.0;
    let prod = (na * nb) as f64;
    let u_of = |sum: f64| {
        let u = sum - offset;
        u.min(prod - u)
    };
    let u_obs = u_of(ranks[..na].iter().sum());
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        total += 1;
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if u_of(s) <= u_obs {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

pub fn welch_statistic(a: &[f64], b: &[f64]) -> f64 {
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let mu = m(v);
        v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    (m(a) - m(b)) / (var(a) / a.len() as f64 + var(b) / b.len() as f64).sqrt()
}

/// Monte-Carlo two-sided p-value of a Welch statistic under Gaussian groups
/// with equal means and the given standard deviations.
pub fn welch_monte_carlo_p(t_obs: f64, na: usize, nb: usize, sd_a: f64, sd_b: f64, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (ga, gb) = (Normal::new(0.0, sd_a).unwrap(), Normal::new(0.0, sd_b).unwrap());
    let mut a = vec![0.0; na];
    let mut b = vec![0.0; nb];
    let mut hits = 0usize;
    for _ in 0..draws {
        a.iter_mut().for_each(|v| *v = ga.sample(rng));
        b.iter_mut().for_each(|v| *v = gb.sample(rng));
        if welch_statistic(&a, &b).abs() >= t_obs.abs() {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// Two-sided permutation mid-p-value of `|stat(a, b)|` over `perms` random
/// relabelings: exceedances count 1 and ties 1/2, which matches continuous
/// approximations on lattice-valued data.
pub fn permutation_p(a: &[f64], b: &[f64], perms: usize, rng: &mut ChaCha8Rng, stat: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let obs = stat(a, b).abs();
    let tol = 1e-9 * obs.max(1.0);
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut hits = 0.0;
    for _ in 0..perms {
        for i in (1..pooled.len()).rev() {
            let j = rng.random_range(0..=i);
            pooled.swap(i, j);
        }
        let s = stat(&pooled[..a.len()], &pooled[a.len()..]).abs();
        if s.is_nan() || s > obs + tol {
            hits += 1.0;
        } else if s >= obs - tol {
            hits += 0.5;
        }
    }
    hits / perms as f64
}

/// Otsu threshold by exhaustive scan in exact rational arithmetic. Class 0 is
/// `bin < t`; the between-class variance `w0 w1 (mu0 - mu1)^2` is maximized
/// over `t` in `1..=255`, lowest `t` on ties.
pub fn otsu_exhaustive(h: &[u64; 256]) -> Option<u8> {
    let total: u64 = h.iter().sum();
    let n = BigRational::from_integer(BigInt::from(total));
    let mut best: Option<(BigRational, u8)> = None;
    for t in 1..256usize {
        let w0c: u64 = h[..t].iter().sum();
        let w1c = total - w0c;
        if w0c == 0 || w1c == 0 {
            continue;
        }
        let s0: u64 = h[..t].iter().enumerate().map(|(i, &c)| i as u64 * c).sum();
        let s1: u64 = h[t..].iter().enumerate().map(|(i, &c)| (i + t) as u64 * c).sum();
        let big = |v: u64| BigRational::from_integer(BigInt::from(v));
        let mu0 = big(s0) / big(w0c);
        let mu1 = big(s1) / big(w1c);
        let d = mu0 - mu1;
        let var = (big(w0c) / n.clone()) * (big(w1c) / n.clone()) * d.clone() * d;
        if best.as_ref().is_none_or(|(b, _)| var > *b) {
            best = Some((var, t as u8));
        }
    }
    best.map(|(_, t)| t)
}

/// Full windows by walking the start offsets.
pub fn windows_by_walking(len: usize, size: usize, stride: usize) -> usize {
    let mut count = 0;
    let mut start = 0;
    while start + size <= len {
        count += 1;
        start += stride;
    }
    count
}

/// Mean nearest-neighbour distance of a point set (O(N²)).
pub fn mean_nearest_neighbour(points: &[[f64; 2]]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let total: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Some(total / points.len() as f64)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_differences(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Gradient-descent logistic regression on labelled points; returns the
/// training accuracy reached. Used only to confirm a fixture is separable.
pub fn logistic_regression_accuracy(x: &[Vec<f64>], y: &[bool], steps: usize, lr: f64) -> f64 {
    let d = x[0].len();
    let mut w = vec![0.0; d + 1];
    for _ in 0..steps {
        let mut g = vec![0.0; d + 1];
        for (xi, &yi) in x.iter().zip(y) {
            let z = w[d] + xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            let e = p - if yi { 1.0 } else { 0.0 };
            for k in 0..d {
                g[k] += e * xi[k];
            }
            g[d] += e;
        }
        for k in 0..=d {
            w[k] -= lr * g[k] / x.len() as f64;
        }
    }
    let correct = x
        .iter()
        .zip(y)
        .filter(|(xi, &yi)| (w[d] + xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() > 0.0) == yi)
        .count();
    correct as f64 / x.len() as f64
}

/// Uniform random point in `[0, side)²`.
pub fn random_cloud(n: usize, side: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)]).collect()
}
