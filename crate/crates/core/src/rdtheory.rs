//! Closed-form rate-distortion curves of a memoryless Gaussian source under
//! squared error.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    #[error("variance and rate must be nonnegative numbers")]
    NegativeInput,
    #[error("invalid rate range: {0}")]
    InvalidRange(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateScale {
    Linear,
    Log10,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateDistortionPoint {
    pub rate: f64,
    pub distortion: f64,
    pub fidelity: f64,
    pub variance: f64,
}

fn check(variance: f64, rate: f64) -> Result<(), TheoryError> {
    if variance >= 0.0 && rate >= 0.0 {
        Ok(())
    } else {
        Err(TheoryError::NegativeInput)
    }
}

/// `D(R) = variance * 2^(-2R)`.
pub fn gaussian_drf(variance: f64, rate: f64) -> Result<f64, TheoryError> {
    check(variance, rate)?;
    Ok(variance * libm::exp2(-2.0 * rate))
}

/// `F(R) = variance - D(R)`.
pub fn fidelity_rate(variance: f64, rate: f64) -> Result<f64, TheoryError> {
    Ok(variance - gaussian_drf(variance, rate)?)
}

pub fn point(variance: f64, rate: f64) -> Result<RateDistortionPoint, TheoryError> {
    let distortion = gaussian_drf(variance, rate)?;
    Ok(RateDistortionPoint {
        rate,
        distortion,
        fidelity: variance - distortion,
        variance,
    })
}

/// `n` points evenly spaced in rate (or in `log10` rate).
pub fn sample_curves(
    variance: f64,
    rate_min: f64,
    rate_max: f64,
    n: usize,
    scale: RateScale,
) -> Result<Vec<RateDistortionPoint>, TheoryError> {
    if n < 2 {
        return Err(TheoryError::InvalidRange("need at least two points"));
    }
    if !(rate_min >= 0.0 && rate_min < rate_max && rate_max.is_finite()) {
        return Err(TheoryError::InvalidRange("need 0 <= rate_min < rate_max"));
    }
    if scale == RateScale::Log10 && rate_min <= 0.0 {
        return Err(TheoryError::InvalidRange("log scale needs rate_min > 0"));
    }
    let (lo, hi) = match scale {
        RateScale::Linear => (rate_min, rate_max),
        RateScale::Log10 => (libm::log10(rate_min), libm::log10(rate_max)),
    };
    (0..n)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let rate = match scale {
                _ if i == 0 => rate_min,
                _ if i == n - 1 => rate_max,
                RateScale::Linear => t,
                RateScale::Log10 => libm::pow(10.0, t),
            };
            point(variance, rate)
        })
        .collect()
}

/// Entropy of English text, bits per character; used only to annotate
/// rate plots.
pub fn english_entropy_reference() -> f64 {
    1.3
}
