//! Scalar probability transforms.

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Standard normal CDF, `Φ(x) = ½ erfc(-x/√2)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Two-sided critical value `z` with `P(|N(0,1)| ≤ z) = level`.
pub fn two_sided_z(level: f64) -> f64 {
    normal_quantile(0.5 + 0.5 * level)
}

/// Quantile of the shape-1 gamma (exponential) law with the given scale.
pub fn gamma_shape1_quantile(p: f64, scale: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::DomainError(format!("gamma quantile needs 0 <= p < 1, got {p}")));
    }
    if !(scale > 0.0) {
        return Err(Error::DomainError(format!("gamma scale must be positive, got {scale}")));
    }
    Ok(-scale * (-p).ln_1p())
}
