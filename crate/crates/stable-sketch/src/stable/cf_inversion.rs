//! Direct quadrature of the characteristic-function inversion integrals,
//!
//! ```text
//! f(x) = (1/pi) INT_0^inf cos(t x) exp(-t^alpha) dt
//! F(x) = 1/2 + (1/pi) INT_0^inf sin(t x)/t exp(-t^alpha) dt
//! ```
//!
//! truncated where `exp(-T^alpha) < 1e-18` and split at the zeros of the
//! oscillating factor. This is the slow reference route used to
//! cross-validate the production path in [`super::zolotarev`]; the
//! truncation point grows like `(41)^(1/alpha)`, so it is only practical
//! for moderate alpha (>= ~0.4) and |x| up to a few tens.

use super::quad::adaptive_gk15;
use crate::error::{Error, Result};
use std::f64::consts::PI;

const LN_TAIL: f64 = 41.45; // -ln 1e-18

fn truncation(alpha: f64) -> f64 {
    LN_TAIL.powf(1.0 / alpha)
}

fn oscillatory_sum<F: Fn(f64) -> f64>(
    integrand: F,
    zero_spacing: f64,
    first_zero: f64,
    cut: f64,
) -> Result<f64> {
    let panels = (cut / zero_spacing) as u64;
    if panels > 500_000 {
        return Err(Error::Degenerate(format!(
            "cf-inversion oracle would need {panels} oscillation panels; \
             use the production path instead"
        )));
    }
    let mut total = 0.0;
    let mut a = 0.0_f64;
    let mut b = first_zero.min(cut);
    loop {
        total += adaptive_gk15(&integrand, a, b, 1e-14, 1e-12);
        if b >= cut {
            break;
        }
        a = b;
        b = (b + zero_spacing).min(cut);
    }
    Ok(total)
}

/// Density via characteristic-function inversion.
pub fn pdf(x: f64, alpha: f64) -> Result<f64> {
    crate::stable::check_alpha(alpha)?;
    let x = x.abs();
    let cut = truncation(alpha);
    let integrand = |t: f64| (t * x).cos() * (-t.powf(alpha)).exp();
    let value = if x * cut <= PI {
        adaptive_gk15(&integrand, 0.0, cut, 1e-14, 1e-12)
    } else {
        oscillatory_sum(integrand, PI / x, 0.5 * PI / x, cut)?
    };
    Ok(value / PI)
}

/// Distribution function via characteristic-function inversion.
pub fn cdf(x: f64, alpha: f64) -> Result<f64> {
    crate::stable::check_alpha(alpha)?;
    if x < 0.0 {
        return Ok(1.0 - cdf(-x, alpha)?);
    }
    let cut = truncation(alpha);
    let integrand = |t: f64| {
        if t == 0.0 {
            x
        } else {
            (t * x).sin() / t * (-t.powf(alpha)).exp()
        }
    };
    let value = if x * cut <= PI {
        adaptive_gk15(&integrand, 0.0, cut, 1e-14, 1e-12)
    } else {
        oscillatory_sum(integrand, PI / x, PI / x, cut)?
    };
    Ok(0.5 + value / PI)
}
