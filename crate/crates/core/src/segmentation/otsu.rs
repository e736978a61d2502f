use crate::error::{Error, Result};

/// Largest pixel count for which between-class variances are compared in
/// exact integer arithmetic.
const EXACT_LIMIT: u64 = 1 << 18;

/// Otsu threshold over a 256-bin histogram. Class 0 is `bin < t`, so the
/// result lies in `1..=255`. Returns the lowest `t` maximizing the
/// between-class variance.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Result<u8> {
    if histogram.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::UnimodalHistogram);
    }
    let total: u64 = histogram.iter().sum();
    let sum: u64 = histogram.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();
    if total <= EXACT_LIMIT {
        Ok(scan_exact(histogram, total, sum))
    } else {
        Ok(scan_float(histogram, total, sum))
    }
}

// sigma_b^2 * N^2 = (N*S0 - W0*S)^2 / (W0*W1); compare as fractions.
fn scan_exact(h: &[u64; 256], total: u64, sum: u64) -> u8 {
    let mut best: Option<(u128, u128, u8)> = None;
    let (mut w0, mut s0) = (0u64, 0u64);
    for t in 1..256usize {
        w0 += h[t - 1];
        s0 += (t - 1) as u64 * h[t - 1];
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let diff = (total as i128 * s0 as i128 - w0 as i128 * sum as i128).unsigned_abs();
        let num = diff * diff;
        let den = w0 as u128 * w1 as u128;
        match best {
            Some((bn, bd, _)) if num * bd <= bn * den => {}
            _ => best = Some((num, den, t as u8)),
        }
    }
    best.expect("two non-empty bins give a valid split").2
}

fn scan_float(h: &[u64; 256], total: u64, sum: u64) -> u8 {
    let (n, s) = (total as f64, sum as f64);
    let mut best = (f64::NEG_INFINITY, 0u8);
    let (mut w0, mut s0) = (0.0f64, 0.0f64);
    for t in 1..256usize {
        w0 += h[t - 1] as f64;
        s0 += (t - 1) as f64 * h[t - 1] as f64;
        let w1 = n - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let d = n * s0 - w0 * s;
        let v = d * d / (w0 * w1);
        if v > best.0 {
            best = (v, t as u8);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_levels() {
        let mut h = [0u64; 256];
        h[50] = 300;
        h[200] = 700;
        let t = otsu_threshold(&h).unwrap();
        assert!((50..200).contains(&t));
        assert_eq!(t, 51);
    }

    #[test]
    fn single_value_is_error() {
        let mut h = [0u64; 256];
        h[17] = 10;
        assert!(matches!(otsu_threshold(&h), Err(Error::UnimodalHistogram)));
        assert!(otsu_threshold(&[0; 256]).is_err());
    }

    #[test]
    fn exact_and_float_agree_on_clear_mixture() {
        let mut h = [0u64; 256];
        for v in 40..=45 {
            h[v] = 50;
        }
        for v in 180..=185 {
            h[v] = 117;
        }
        let t = otsu_threshold(&h).unwrap();
        assert!(t > 45 && t < 180, "t = {t}");
        let total = h.iter().sum();
        let sum = h.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();
        assert_eq!(scan_float(&h, total, sum), t);
    }
}
