use super::special::student_t_quantile;
use super::{mean, sample_variance};
use crate::error::{Error, Result};

/// Half-width `t_{n-1, (1+level)/2} * sd / sqrt(n)` of the t interval for the mean.
pub fn ci_half_width(sample: &[f64], level: f64) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::TooFewSamples(format!("confidence interval needs n >= 2, got {}", sample.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level must be in (0, 1), got {level}")));
    }
    let n = sample.len() as f64;
    let sd = sample_variance(sample).sqrt();
    if sd == 0.0 {
        return Ok(0.0);
    }
    Ok(student_t_quantile(0.5 + level / 2.0, n - 1.0) * sd / n.sqrt())
}

/// Two-sided t confidence interval `(low, high)` for the mean.
pub fn ci_mean(sample: &[f64], level: f64) -> Result<(f64, f64)> {
    let hw = ci_half_width(sample, level)?;
    let m = mean(sample);
    Ok((m - hw, m + hw))
}
