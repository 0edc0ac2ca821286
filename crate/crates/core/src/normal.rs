//! Standard normal CDF, density, and inverse CDF.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("probability {0} is outside the open interval (0, 1)")]
pub struct DomainError(pub f64);

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Φ(−2), the lower tail mass cut by a ±2σ truncation.
pub const CDF_MINUS_TWO: f64 = 0.022_750_131_948_179_207;
/// Φ(2).
pub const CDF_PLUS_TWO: f64 = 0.977_249_868_051_820_8;
/// Φ(2) − Φ(−2).
pub const CDF_TWO_SIDED_MASS: f64 = 0.954_499_736_103_641_6;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn rational_tail(q: f64) -> f64 {
    (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
        / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
}

fn initial_guess(p: f64) -> f64 {
    if p < P_LOW {
        rational_tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -rational_tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Φ⁻¹(p): a rational first guess refined by one Halley step against `erfc`.
pub fn inverse_cdf(p: f64) -> Result<f64, DomainError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DomainError(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let x = initial_guess(p);
    // In the upper tail 1 − p loses digits, so refine the mirrored lower-tail
    // problem instead.
    if p > 0.5 {
        let q = 1.0 - p;
        return Ok(-halley(-x, q));
    }
    Ok(halley(x, p))
}

fn halley(x: f64, p: f64) -> f64 {
    let e = cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
