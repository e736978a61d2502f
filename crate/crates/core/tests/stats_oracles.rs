mod common;

use clonescope::stats::{ci_mean, mann_whitney_u, welch_t, wilcoxon_signed_rank};
use common::{mann_whitney_enumeration_p, welch_monte_carlo_p, welch_statistic, wilcoxon_enumeration_p};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Values on a coarse grid so ties and zero differences occur.
fn sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..8) as f64 * 0.5).collect()
}

#[test]
fn wilcoxon_equals_sign_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 300 {
        let n = rng.random_range(1..=12);
        let (x, y) = (sample(n, &mut rng), sample(n, &mut rng));
        let Ok(r) = wilcoxon_signed_rank(&x, &y) else { continue };
        assert!(r.exact);
        assert_eq!(r.p, wilcoxon_enumeration_p(&x, &y), "x {x:?} y {y:?}");
        checked += 1;
    }
}

#[test]
fn wilcoxon_textbook_sign_patterns() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let r = wilcoxon_signed_rank(&x, &[0.0; 5]).unwrap();
    assert_eq!(r.p, 1.0 / 16.0);
    assert_eq!(wilcoxon_enumeration_p(&x, &[0.0; 5]), 1.0 / 16.0);
}

#[test]
fn mann_whitney_equals_label_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..300 {
        let na = rng.random_range(1..=11);
        let nb = rng.random_range(1..=12 - na);
        let (a, b) = (sample(na, &mut rng), sample(nb, &mut rng));
        let r = mann_whitney_u(&a, &b);
        assert!(r.exact);
        assert_eq!(r.p, mann_whitney_enumeration_p(&a, &b), "a {a:?} b {b:?}");
    }
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]);
    assert_eq!((r.statistic, r.p), (0.0, 0.1));
}

#[test]
fn wilcoxon_normal_approximation_near_exact_at_twelve() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let g = Normal::new(0.3, 1.0).unwrap();
    for _ in 0..50 {
        let x: Vec<f64> = (0..12).map(|_| g.sample(&mut rng)).collect();
        let y = vec![0.0; 12];
        let exact = wilcoxon_enumeration_p(&x, &y);
        // Continuity-corrected normal approximation without ties.
        let d: Vec<f64> = x.clone();
        let ranks = common::midranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
        let t: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
        let (mu, var) = (12.0 * 13.0 / 4.0, 12.0 * 13.0 * 25.0 / 24.0);
        let z = ((t - mu).abs() - 0.5).max(0.0) / f64::sqrt(var);
        let approx = (2.0 * statrs_normal_sf(z)).min(1.0);
        assert!((exact - approx).abs() < 0.03, "exact {exact} approx {approx}");
        assert_eq!(wilcoxon_signed_rank(&x, &y).unwrap().p, exact);
    }
}

fn statrs_normal_sf(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    1.0 - Normal::new(0.0, 1.0).unwrap().cdf(z)
}

#[test]
fn wilcoxon_large_sample_approximation_tracks_enumeration_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let g = Normal::new(0.2, 1.0).unwrap();
    for _ in 0..20 {
        let x: Vec<f64> = (0..13).map(|_| g.sample(&mut rng)).collect();
        let r = wilcoxon_signed_rank(&x, &[0.0; 13]).unwrap();
        assert!(!r.exact);
        let exact = wilcoxon_enumeration_p(&x, &[0.0; 13]);
        assert!((r.p - exact).abs() < 0.03, "approx {} exact {exact}", r.p);
    }
}

#[test]
fn welch_matches_monte_carlo_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let (na, nb, sa, sb) = (8, 12, 1.0, 3.0);
    for shift in [0.3, 1.0, 2.0] {
        let a: Vec<f64> = (0..na).map(|_| Normal::new(shift, sa).unwrap().sample(&mut rng)).collect();
        let b: Vec<f64> = (0..nb).map(|_| Normal::new(0.0, sb).unwrap().sample(&mut rng)).collect();
        let r = welch_t(&a, &b).unwrap();
        let t = welch_statistic(&a, &b);
        assert!((r.statistic - t).abs() < 1e-12);
        let mc = welch_monte_carlo_p(t, na, nb, sa, sb, 100_000, &mut rng);
        assert!((r.p - mc).abs() < 0.01, "welch {} monte carlo {mc}", r.p);
    }
}

#[test]
fn t_interval_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let g = Normal::new(5.0, 2.0).unwrap();
    let trials = 10_000;
    let covered = (0..trials)
        .filter(|_| {
            let s: Vec<f64> = (0..10).map(|_| g.sample(&mut rng)).collect();
            let (lo, hi) = ci_mean(&s, 0.99).unwrap();
            lo <= 5.0 && 5.0 <= hi
        })
        .count();
    let rate = covered as f64 / trials as f64;
    assert!((rate - 0.99).abs() <= 0.01, "coverage {rate}");
}

proptest! {
    #[test]
    fn p_values_are_probabilities_and_symmetric(a in prop::collection::vec(-50.0f64..50.0, 2..20),
                                                b in prop::collection::vec(-50.0f64..50.0, 2..20)) {
        let mw = mann_whitney_u(&a, &b);
        prop_assert!(mw.p > 0.0 && mw.p <= 1.0);
        prop_assert_eq!(mw.p, mann_whitney_u(&b, &a).p);
        let w = welch_t(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&w.p));
        prop_assert!((w.p - welch_t(&b, &a).unwrap().p).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_symmetric_under_swap(x in prop::collection::vec(-5i32..5, 1..25), y in prop::collection::vec(-5i32..5, 25)) {
        let x: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = y[..x.len()].iter().map(|&v| v as f64).collect();
        if let Ok(r) = wilcoxon_signed_rank(&x, &y) {
            prop_assert_eq!(r.p, wilcoxon_signed_rank(&y, &x).unwrap().p);
        }
    }
}
