use crate::error::{Error, Result};

// Below this the power series is used; above it the asymptotic expansion
// has a smallest term well under 1e-20.
const SERIES_LIMIT: f64 = 30.0;

fn check(func: &'static str, z: f64) -> Result<()> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::Domain { func, value: z });
    }
    Ok(())
}

/// Power series sum_k (z^2/4)^k / (k!)^2. All terms are positive.
fn i0_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// Asymptotic bracket sum of I0(z) e^{-z} sqrt(2 pi z), valid for large z.
fn i0_asymptotic_factor(z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * z * k);
        if next >= term {
            return sum;
        }
        sum += next;
        if next < 1e-18 * sum {
            return sum;
        }
        term = next;
        k += 1.0;
    }
}

/// Exponentially scaled Bessel function `e^{-z} I0(z)`, finite for every
/// finite `z >= 0`.
pub fn bessel_i0_scaled(z: f64) -> Result<f64> {
    check("bessel_i0_scaled", z)?;
    Ok(i0_scaled_unchecked(z))
}

pub(crate) fn i0_scaled_unchecked(z: f64) -> f64 {
    if z < SERIES_LIMIT {
        i0_series(z) * (-z).exp()
    } else {
        i0_asymptotic_factor(z) / (2.0 * std::f64::consts::PI * z).sqrt()
    }
}

/// Modified Bessel function of the first kind, order zero.
///
/// Overflows to `+inf` once `z` exceeds roughly 713; use [`log_bessel_i0`]
/// or [`bessel_i0_scaled`] there.
pub fn bessel_i0(z: f64) -> Result<f64> {
    check("bessel_i0", z)?;
    if z < SERIES_LIMIT {
        Ok(i0_series(z))
    } else {
        Ok(i0_scaled_unchecked(z) * z.exp())
    }
}

/// `ln I0(z)` without overflow.
pub fn log_bessel_i0(z: f64) -> Result<f64> {
    check("log_bessel_i0", z)?;
    Ok(i0_scaled_unchecked(z).ln() + z)
}

/// Regularized confluent hypergeometric limit function 0F1(;1;z),
/// evaluated through the identity 0F1(;1;z) = I0(2 sqrt z).
pub fn hyp0f1_reg(z: f64) -> Result<f64> {
    check("hyp0f1_reg", z)?;
    bessel_i0(2.0 * z.sqrt())
}
