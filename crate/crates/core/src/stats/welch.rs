use super::special::student_t_two_sided;
use super::{mean, sample_variance, TestResult};
use crate::error::{Error, Result};

/// Welch's unequal-variance t test with Satterthwaite degrees of freedom.
///
/// When both samples have zero variance the result is `p = 1` for equal
/// means and `p = 0` (flagged degenerate) otherwise.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewSamples(format!(
            "welch t needs at least 2 samples per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = qa + qb;
    let base = TestResult {
        method: "welch_t".into(),
        statistic: 0.0,
        p: 1.0,
        n: vec![a.len(), b.len()],
        exact: false,
        df: None,
        zeros_dropped: 0,
        degenerate: false,
    };
    if se2 == 0.0 {
        return Ok(if ma == mb {
            base
        } else {
            let statistic = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
            TestResult { statistic, p: 0.0, degenerate: true, ..base }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let p = student_t_two_sided(t, df).clamp(0.0, 1.0);
    Ok(TestResult { statistic: t, p, df: Some(df), ..base })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples() {
        let a = [1.0, 2.5, 3.0, 7.0];
        let r = welch_t(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric() {
        let a = [1.0, 2.5, 3.0, 7.0, 2.2];
        let b = [4.0, 6.1, 5.5];
        let (ab, ba) = (welch_t(&a, &b).unwrap(), welch_t(&b, &a).unwrap());
        assert_eq!(ab.p, ba.p);
        assert_eq!(ab.statistic, -ba.statistic);
    }

    #[test]
    fn degenerate_cases() {
        let r = welch_t(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.p, 1.0);
        assert!(!r.degenerate);
        let r = welch_t(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.degenerate);
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn matches_textbook_example() {
        // Computed by hand: means 20.0 and 16.0, variances 10.0 and 5.0, n = 5 each.
        let a = [16.0, 18.0, 20.0, 22.0, 24.0];
        let b = [13.0, 15.0, 16.0, 17.0, 19.0];
        let r = welch_t(&a, &b).unwrap();
        let se = 3f64.sqrt();
        assert!((r.statistic - 4.0 / se).abs() < 1e-12);
        let df = 9.0 / (4.0 / 4.0 + 1.0 / 4.0);
        assert!((r.df.unwrap() - df).abs() < 1e-12);
    }
}
