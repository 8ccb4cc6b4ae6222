//! Variance-stabilizing transform for price series.
//!
//! Electricity prices are spiky and can be negative, so series are optionally
//! compressed before fitting with a signed power transform
//!
//! ```text
//! f(p) = sign(p) * ((|p| + 1)^lambda - 1) / lambda     for lambda > 0
//! f(p) = sign(p) * ln(|p| + 1)                          for lambda = 0
//! ```
//!
//! which is odd, strictly increasing, and fixes 0. The power case converges to
//! the log case as lambda -> 0. Series are standardized first by subtracting
//! the median and dividing by the median absolute deviation, both computed on
//! the calibration data only.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VstError {
    #[error("transform exponent must be finite and >= 0, got {0}")]
    BadLambda(f64),
    #[error("cannot standardize an empty series")]
    EmptySeries,
    #[error("non-finite value {value} at position {index}")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("median absolute deviation is zero (all values equal {median}); cannot standardize")]
    ZeroMad { median: f64 },
}

/// Default exponent: square-root-like compression.
pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Signed power transform of a single price.
pub fn vst_forward(p: f64, lambda: f64) -> Result<f64, VstError> {
    check_lambda(lambda)?;
    let sign = if p < 0.0 { -1.0 } else { 1.0 };
    let a = p.abs();
    Ok(if lambda == 0.0 {
        sign * a.ln_1p()
    } else {
        sign * ((a + 1.0).powf(lambda) - 1.0) / lambda
    })
}

/// Exact inverse of [`vst_forward`] with the same exponent.
pub fn vst_inverse(y: f64, lambda: f64) -> Result<f64, VstError> {
    check_lambda(lambda)?;
    let sign = if y < 0.0 { -1.0 } else { 1.0 };
    let a = y.abs();
    Ok(if lambda == 0.0 {
        sign * a.exp_m1()
    } else {
        sign * ((lambda * a + 1.0).powf(1.0 / lambda) - 1.0)
    })
}

fn check_lambda(lambda: f64) -> Result<(), VstError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(VstError::BadLambda(lambda));
    }
    Ok(())
}

/// Location/scale parameters estimated on a calibration series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    /// Sample median.
    pub center: f64,
    /// Median absolute deviation from the median (unscaled — no normal
    /// consistency factor).
    pub scale: f64,
}

impl Standardization {
    /// Estimates median and MAD. A zero MAD (constant series) is an error:
    /// the caller must not silently divide by zero.
    pub fn fit(series: &[f64]) -> Result<Self, VstError> {
        if series.is_empty() {
            return Err(VstError::EmptySeries);
        }
        if let Some((index, value)) =
            series.iter().enumerate().find(|(_, v)| !v.is_finite())
        {
            return Err(VstError::NonFiniteValue { index, value: *value });
        }
        let center = median(series);
        let deviations: Vec<f64> = series.iter().map(|v| (v - center).abs()).collect();
        let scale = median(&deviations);
        if scale == 0.0 {
            return Err(VstError::ZeroMad { median: center });
        }
        Ok(Self { center, scale })
    }

    pub fn apply(&self, p: f64) -> f64 {
        (p - self.center) / self.scale
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.scale + self.center
    }
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
