//! Zolotarev-style integral representation of the symmetric stable pdf/cdf.
//!
//! For x > 0 and alpha in (0, 2), alpha != 1, with
//!
//! ```text
//! V(phi) = (cos phi / sin(alpha phi))^(alpha/(alpha-1)) * cos((alpha-1) phi) / cos phi
//! c      = x^(alpha/(alpha-1))
//! ```
//!
//! the standard density and distribution function are
//!
//! ```text
//! f(x) = alpha / (pi |alpha-1|) * x^(1/(alpha-1)) * I1,   I1 = INT_0^(pi/2) V e^(-cV) dphi
//! F(x) = 1/2 + I0/pi   (alpha < 1)      I0 = INT_0^(pi/2) e^(-cV) dphi
//! F(x) = 1   - I0/pi   (alpha > 1)
//! ```
//!
//! V is monotone on (0, pi/2) (increasing for alpha < 1, decreasing for
//! alpha > 1), so both integrands are bell-shaped or monotone. The
//! integration grid is anchored at the level sets cV = L for a ladder of L,
//! located by bisection on ln V; the pdf integrand is rescaled by its peak
//! value exp(M) so the quadrature always works on O(1) numbers even when
//! c over- or underflows the exponent range (c is only ever handled as
//! ln c). Normalization was verified analytically: substituting
//! s = x^(alpha/(alpha-1)) collapses INT f dx to 1/2, and at alpha = 2 the
//! representation reduces exactly to the variance-2 normal.

use super::quad::adaptive_gk15_pair;
use std::f64::consts::FRAC_PI_2;

/// Smallest distance kept from the endpoints of (0, pi/2).
const PHI_EPS: f64 = 1e-13;

/// cV ladder anchoring the panel boundaries. The low levels matter: for
/// alpha > 1 the integrand decays only like a power of phi once cV has
/// dropped below 1, and the extra cuts keep that region well bracketed.
const LEVELS: [f64; 9] = [1e-8, 1e-6, 1e-4, 1e-2, 0.5, 1.0, 10.0, 100.0, 700.0];

#[inline]
fn ln_v(phi: f64, alpha: f64) -> f64 {
    let a1 = alpha - 1.0;
    let cos_phi = (FRAC_PI_2 - phi).sin();
    let ln_cos = cos_phi.ln();
    (alpha / a1) * (ln_cos - (alpha * phi).sin().ln()) + (a1 * phi).cos().ln() - ln_cos
}

/// Solves ln V(phi) = target by bisection; `increasing` is the sign of V'.
fn level_point(target: f64, alpha: f64, increasing: bool, lo0: f64, hi0: f64) -> f64 {
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        let below = ln_v(mid, alpha) < target;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct Integrals {
    /// INT e^(-cV) dphi
    i_cdf: f64,
    /// log-scale shift of the pdf integrand
    m_shift: f64,
    /// INT exp(ln V - cV - M) dphi
    j_pdf: f64,
}

fn integrate(x: f64, alpha: f64) -> Integrals {
    debug_assert!(x > 0.0 && alpha > 0.0 && alpha < 2.0 && alpha != 1.0);
    let ln_c = alpha / (alpha - 1.0) * x.ln();
    let increasing = alpha < 1.0;
    let lo = PHI_EPS;
    let hi = FRAC_PI_2 - PHI_EPS;

    // Panel boundaries where cV crosses the level ladder.
    let mut cuts: Vec<f64> = Vec::with_capacity(LEVELS.len() + 2);
    cuts.push(lo);
    let (v_lo, v_hi) = (ln_v(lo, alpha), ln_v(hi, alpha));
    let (v_min, v_max) = if increasing { (v_lo, v_hi) } else { (v_hi, v_lo) };
    for level in LEVELS {
        let target = level.ln() - ln_c; // ln V at the crossing
        if target > v_min && target < v_max {
            cuts.push(level_point(target, alpha, increasing, lo, hi));
        }
    }
    cuts.push(hi);
    cuts.sort_unstable_by(f64::total_cmp);

    // Peak of the pdf integrand exponent ln V - cV: at cV = 1 when that level
    // is interior, otherwise at whichever endpoint has the larger exponent.
    let exponent = |phi: f64| {
        let lv = ln_v(phi, alpha);
        let cv = (ln_c + lv).exp();
        lv - cv
    };
    let mut m_shift = f64::NEG_INFINITY;
    if -ln_c > v_min && -ln_c < v_max {
        m_shift = -ln_c - 1.0;
    }
    for &phi in &cuts {
        let e = exponent(phi);
        if e > m_shift {
            m_shift = e;
        }
    }

    let integrand = |phi: f64| -> [f64; 2] {
        let lv = ln_v(phi, alpha);
        let cv = (ln_c + lv).exp();
        let e_cdf = if cv > 745.0 { 0.0 } else { (-cv).exp() };
        let arg = lv - cv - m_shift;
        let e_pdf = if arg < -745.0 { 0.0 } else { arg.exp() };
        [e_cdf, e_pdf]
    };

    let mut i_cdf = 0.0;
    let mut j_pdf = 0.0;
    for w in cuts.windows(2) {
        let v = adaptive_gk15_pair(&integrand, w[0], w[1], 1e-30, 1e-11);
        i_cdf += v[0];
        j_pdf += v[1];
    }
    Integrals { i_cdf, m_shift, j_pdf }
}

/// Density of S(alpha, 1) at x >= 0, alpha in (0, 2) \ {1}.
pub fn pdf(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        return super::pdf_at_origin(alpha);
    }
    let parts = integrate(x, alpha);
    if parts.j_pdf <= 0.0 {
        return 0.0;
    }
    let a1 = alpha - 1.0;
    let ln_f = (alpha / (std::f64::consts::PI * a1.abs())).ln() + x.ln() / a1
        + parts.m_shift
        + parts.j_pdf.ln();
    ln_f.exp()
}

/// Distribution function of S(alpha, 1) at x >= 0, alpha in (0, 2) \ {1}.
pub fn cdf_upper_half(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let parts = integrate(x, alpha);
    let frac = parts.i_cdf / std::f64::consts::PI;
    if alpha < 1.0 {
        (0.5 + frac).min(1.0)
    } else {
        (1.0 - frac).max(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::{cauchy_cdf, cauchy_pdf, gauss_cdf, gauss_pdf};

    #[test]
    fn reduces_to_normal_at_alpha_two() {
        // alpha = 2 keeps the representation regular (exponent 2), so the
        // generic path can be compared against the closed form directly.
        let mut x = 0.05;
        while x <= 20.0 {
            let f = pdf(x, 2.0 - 1e-12);
            let c = cdf_upper_half(x, 2.0 - 1e-12);
            assert!((f - gauss_pdf(x)).abs() < 1e-8, "pdf x={x}: {f}");
            assert!((c - gauss_cdf(x)).abs() < 1e-8, "cdf x={x}: {c}");
            x += 0.4;
        }
    }

    #[test]
    fn matches_cauchy_just_off_alpha_one() {
        // Continuity check at alpha = 1 +- 0.02; tolerance reflects the
        // O(|alpha-1|) distance between the laws, not quadrature error.
        for alpha in [0.98, 1.02] {
            for x in [0.3, 1.0, 3.0, 10.0] {
                assert!((pdf(x, alpha) - cauchy_pdf(x)).abs() < 6e-3);
                assert!((cdf_upper_half(x, alpha) - cauchy_cdf(x)).abs() < 6e-3);
            }
        }
    }

    #[test]
    fn tail_mass_matches_pareto_asymptote() {
        // P(X > x) -> Gamma(alpha) sin(pi alpha / 2) / pi * x^(-alpha).
        for alpha in [0.5_f64, 1.5] {
            let c = statrs::function::gamma::gamma(alpha) * (std::f64::consts::PI * alpha / 2.0).sin()
                / std::f64::consts::PI;
            let x = 5e4_f64;
            let tail = 1.0 - cdf_upper_half(x, alpha);
            let asym = c * x.powf(-alpha);
            assert!(
                (tail / asym - 1.0).abs() < 2e-3,
                "alpha={alpha}: tail={tail:e} asym={asym:e}"
            );
        }
    }

    #[test]
    fn extreme_alpha_cdf_is_sane() {
        // alpha = 0.05 spans ~25 decades; the cdf must stay monotone in x
        // and bounded in [0.5, 1) on the positive axis.
        let mut prev = 0.5;
        for exp10 in -8..=18 {
            let x = 10f64.powi(exp10);
            let c = cdf_upper_half(x, 0.05);
            assert!((0.5..=1.0).contains(&c), "x=1e{exp10}: {c}");
            assert!(c >= prev - 1e-12, "non-monotone at x=1e{exp10}");
            prev = c;
        }
    }
}
