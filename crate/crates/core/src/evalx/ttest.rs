//! Paired t-test over per-run metric differences.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided significance as a confidence level in the unit interval:
    /// 1 − p_two_sided.
    pub significance: f64,
    pub df: usize,
    pub mean: f64,
    pub std_dev: f64,
}

/// One-sample t on the paired per-run deltas, df = runs − 1.
pub fn paired_t_test(deltas: &[f64]) -> Result<TTest, EvalError> {
    let n = deltas.len();
    if n < 2 {
        return Err(EvalError::DegenerateVariance);
    }
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(EvalError::DegenerateVariance);
    }
    let t = mean / (sd / (n as f64).sqrt());
    let df = n - 1;
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
    let p_two_sided = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTest { t, significance: 1.0 - p_two_sided, df, mean, std_dev: sd })
}
