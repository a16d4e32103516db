//! Scale-parameter estimators for S(alpha, d) samples: geometric mean,
//! harmonic mean, fractional power, the optimal quantile estimator (raw and
//! bias-corrected), the sample-median baseline, and the arithmetic mean for
//! alpha = 2.
//!
//! All moment-based coefficients derive from the absolute-moment identity
//! for X ~ S(alpha, 1):
//!
//! ```text
//! E|X|^lam = (2/pi) Gamma(1 - lam/alpha) Gamma(lam) sin(pi lam / 2),   -1 < lam < alpha
//! ```
//!
//! Coefficients are functions of (alpha, k) only and are precomputed when an
//! [`EstimatorSpec`] is built, never per estimate.
//!
//! Note on the arithmetic mean: under the `exp(-d |t|^alpha)` convention,
//! `S(2, d)` has variance `2d`, so the alpha = 2 estimator is
//! `(1/2k) sum x_j^2` — the factor 1/2 is not a typo.

use crate::calibration::CalibrationTable;
use crate::error::{Error, Result};
use crate::select::{interpolated_quantile, SampleBuffer};
use crate::stable::abs_quantile_w;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::fmt;

/// Which estimator a spec configures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Gm,
    Hm,
    Fp,
    Oq,
    Oqc,
    Median,
    Am,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Gm,
        EstimatorKind::Hm,
        EstimatorKind::Fp,
        EstimatorKind::Oq,
        EstimatorKind::Oqc,
        EstimatorKind::Median,
        EstimatorKind::Am,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Gm => "gm",
            EstimatorKind::Hm => "hm",
            EstimatorKind::Fp => "fp",
            EstimatorKind::Oq => "oq",
            EstimatorKind::Oqc => "oqc",
            EstimatorKind::Median => "median",
            EstimatorKind::Am => "am",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown estimator `{s}` (gm|hm|fp|oq|oqc|median|am)")))
    }
}

/// A scale estimate together with how it was produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceEstimate {
    pub d_hat: f64,
    pub kind: EstimatorKind,
    pub alpha: f64,
    /// Set when a degenerate correction forced the estimate to clamp at 0.
    pub clamped: bool,
}

/// log|Gamma(x)| and the sign of Gamma(x), valid for negative non-integer
/// arguments via the reflection formula.
fn ln_abs_gamma(x: f64) -> (f64, f64) {
    if x > 0.0 {
        (ln_gamma(x), 1.0)
    } else {
        let s = (PI * x).sin();
        (PI.ln() - s.abs().ln() - ln_gamma(1.0 - x), s.signum())
    }
}

/// E|S(alpha, 1)|^lam for -1 < lam < alpha (lam != 0).
pub(crate) fn abs_moment(lam: f64, alpha: f64) -> Result<f64> {
    if !(lam > -1.0 && lam < alpha) {
        return Err(Error::Domain(format!(
            "absolute moment E|X|^lam requires -1 < lam < alpha, got lam={lam} alpha={alpha}"
        )));
    }
    let (l1, s1) = ln_abs_gamma(1.0 - lam / alpha);
    let (l2, s2) = ln_abs_gamma(lam);
    let sn = (PI * lam / 2.0).sin();
    let value = s1 * s2 * sn.signum() * ((2.0 / PI).ln() + l1 + l2 + sn.abs().ln()).exp();
    debug_assert!(value > 0.0, "absolute moment must be positive");
    Ok(value)
}

fn check_k(k: usize, min: usize, what: &str) -> Result<()> {
    if k < min {
        return Err(Error::Domain(format!("{what} requires k >= {min}, got {k}")));
    }
    Ok(())
}

/// x^p for x >= 0 as exp(p ln x); noticeably cheaper than `powf` on the
/// sample-loop paths and identical in the estimators' Monte-Carlo regime
/// (x = 0 degenerates to 0 or +inf exactly as `powf` does).
#[inline]
fn pow_nonneg(x: f64, p: f64) -> f64 {
    (p * x.ln()).exp()
}

// ---------------------------------------------------------------------------
// Geometric mean
// ---------------------------------------------------------------------------

/// d_gm = prod |x_j|^(alpha/k) / [ (2/pi) G(alpha/k) G(1 - 1/k) sin(pi alpha / 2k) ]^k,
/// exactly unbiased; evaluated in the log domain.
pub fn estimate_gm(samples: &mut SampleBuffer, alpha: f64) -> Result<DistanceEstimate> {
    crate::stable::check_alpha(alpha)?;
    let k = samples.k();
    check_k(k, 2, "geometric mean")?;
    let log_coeff = abs_moment(alpha / k as f64, alpha)?.ln();
    Ok(DistanceEstimate {
        d_hat: gm_from_coeff(samples.as_slice(), alpha, k as f64 * log_coeff),
        kind: EstimatorKind::Gm,
        alpha,
        clamped: false,
    })
}

/// Accumulates the product of per-sample fractional powers |x_j|^(alpha/k),
/// the operation the computational study measures, renormalizing the
/// mantissa whenever the running product drifts out of a safe range so no
/// intermediate can overflow at any k. Equivalent to summing logs.
#[inline]
fn gm_from_coeff(values: &[f64], alpha: f64, k_log_coeff: f64) -> f64 {
    let p = alpha / values.len() as f64;
    let mut prod = 1.0f64;
    let mut scale_exp = 0i64;
    for &v in values {
        prod *= v.powf(p);
        if !(1e-270..=1e270).contains(&prod) {
            if prod == 0.0 {
                return 0.0;
            }
            // Strip the binary exponent, keep the mantissa in [1, 2).
            let bits = prod.to_bits();
            scale_exp += (((bits >> 52) & 0x7ff) as i64) - 1023;
            prod = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
        }
    }
    (prod.ln() + scale_exp as f64 * std::f64::consts::LN_2 - k_log_coeff).exp()
}

// ---------------------------------------------------------------------------
// Harmonic mean
// ---------------------------------------------------------------------------

/// Harmonic mean estimator with its O(1/k) bias correction; valid for
/// alpha < 1/2 only, where the second negative moment E|X|^(-2 alpha) that
/// the correction needs exists.
pub fn estimate_hm(samples: &mut SampleBuffer, alpha: f64) -> Result<DistanceEstimate> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!(
            "harmonic mean estimator is supported for alpha in (0, 0.5); got {alpha}"
        )));
    }
    let k = samples.k();
    let (scale, correction) = hm_coefficients(alpha)?;
    let mut inv_sum = 0.0;
    for &v in samples.as_slice() {
        if v == 0.0 {
            return Err(Error::Domain(
                "harmonic mean estimator is undefined on zero samples".into(),
            ));
        }
        inv_sum += pow_nonneg(v, -alpha);
    }
    Ok(DistanceEstimate {
        d_hat: scale / inv_sum * (k as f64 - correction),
        kind: EstimatorKind::Hm,
        alpha,
        clamped: false,
    })
}

/// (-(2/pi) G(-alpha) sin(pi alpha/2), relative-variance correction term).
fn hm_coefficients(alpha: f64) -> Result<(f64, f64)> {
    let m1 = abs_moment(-alpha, alpha)?;
    let m2 = abs_moment(-2.0 * alpha, alpha)?;
    Ok((m1, m2 / (m1 * m1) - 1.0))
}

// ---------------------------------------------------------------------------
// Fractional power
// ---------------------------------------------------------------------------

/// Legal open interval for the fractional power exponent lambda.
pub fn lambda_bounds(alpha: f64) -> (f64, f64) {
    (-1.0 / (2.0 * alpha), 0.5)
}

/// Variance-factor objective minimized by lambda*; grows without bound at
/// both ends of the legal interval.
pub fn fp_variance_objective(lambda: f64, alpha: f64) -> Result<f64> {
    let (lo, hi) = lambda_bounds(alpha);
    if !(lambda > lo && lambda < hi) || lambda == 0.0 {
        return Err(Error::Domain(format!(
            "lambda must lie in ({lo}, {hi}) \\ {{0}}, got {lambda}"
        )));
    }
    let m1 = abs_moment(lambda * alpha, alpha)?;
    let m2 = abs_moment(2.0 * lambda * alpha, alpha)?;
    Ok((m2 / (m1 * m1) - 1.0) / (lambda * lambda))
}

/// Exponent guard around 0 where the objective's evaluation cancels out.
const LAMBDA_MARGIN: f64 = 1e-4;

/// Minimizes the fractional-power variance objective over the legal range
/// by a coarse scan followed by golden-section refinement.
///
/// As alpha -> 2 the minimizer approaches the boundary 0.5; at alpha = 1 the
/// objective plateaus into lambda -> 0 and the boundary of the guard zone
/// (|lambda| = 1e-4) is returned, which is equivalent to four significant
/// digits.
pub fn solve_lambda_star(alpha: f64) -> Result<f64> {
    crate::stable::check_alpha(alpha)?;
    let (lo, hi) = lambda_bounds(alpha);
    let (lo, hi) = (lo + LAMBDA_MARGIN, hi - LAMBDA_MARGIN);
    let eval = |l: f64| fp_variance_objective(l, alpha).unwrap_or(f64::INFINITY);

    let steps = 100;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=steps {
        let l = lo + (hi - lo) * i as f64 / steps as f64;
        let l = clamp_off_zero(l);
        let v = eval(l);
        if v < best.0 {
            best = (v, l);
        }
    }
    let width = (hi - lo) / steps as f64;
    let mut a = (best.1 - width).max(lo);
    let mut b = (best.1 + width).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (eval(clamp_off_zero(c)), eval(clamp_off_zero(d)));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(clamp_off_zero(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(clamp_off_zero(d));
        }
        if (b - a).abs() < 1e-9 {
            break;
        }
    }
    Ok(clamp_off_zero(0.5 * (a + b)))
}

fn clamp_off_zero(l: f64) -> f64 {
    if l.abs() < LAMBDA_MARGIN {
        if l >= 0.0 {
            LAMBDA_MARGIN
        } else {
            -LAMBDA_MARGIN
        }
    } else {
        l
    }
}

/// Fractional power estimator at exponent `lambda_star`, including the
/// multiplicative O(1/k) bias correction `1 - obj (1 - lambda) / (2k)`.
///
/// A negative correction factor (possible at tiny k with extreme alpha)
/// clamps the estimate to 0 and sets [`DistanceEstimate::clamped`].
pub fn estimate_fp(samples: &mut SampleBuffer, alpha: f64, lambda_star: f64) -> Result<DistanceEstimate> {
    crate::stable::check_alpha(alpha)?;
    let k = samples.k();
    check_k(k, 2, "fractional power")?;
    let coeffs = FpCoeffs::new(alpha, lambda_star, k)?;
    Ok(fp_from_coeffs(samples.as_slice(), alpha, &coeffs))
}

#[derive(Clone, Copy, Debug)]
struct FpCoeffs {
    lambda: f64,
    power: f64,
    inv_moment: f64,
    correction: f64,
}

impl FpCoeffs {
    fn new(alpha: f64, lambda: f64, k: usize) -> Result<Self> {
        let objective = fp_variance_objective(lambda, alpha)?;
        Ok(Self {
            lambda,
            power: lambda * alpha,
            inv_moment: 1.0 / abs_moment(lambda * alpha, alpha)?,
            correction: 1.0 - objective * (1.0 - lambda) / (2.0 * k as f64),
        })
    }
}

fn fp_from_coeffs(values: &[f64], alpha: f64, c: &FpCoeffs) -> DistanceEstimate {
    if c.correction <= 0.0 {
        return DistanceEstimate { d_hat: 0.0, kind: EstimatorKind::Fp, alpha, clamped: true };
    }
    let mut sum = 0.0;
    for &v in values {
        sum += pow_nonneg(v, c.power);
    }
    let base = sum / values.len() as f64 * c.inv_moment;
    let d_hat = pow_nonneg(base, 1.0 / c.lambda) * c.correction;
    DistanceEstimate { d_hat, kind: EstimatorKind::Fp, alpha, clamped: false }
}

// ---------------------------------------------------------------------------
// Quantile family
// ---------------------------------------------------------------------------

/// Optimal quantile estimator: d = (q-th sample quantile of |x| / W)^alpha,
/// with `w = abs_quantile_w(q, alpha)` the population quantile of |S(alpha,1)|.
/// One fractional power per estimate.
pub fn estimate_oq(samples: &mut SampleBuffer, alpha: f64, q: f64, w: f64) -> Result<DistanceEstimate> {
    crate::stable::check_alpha(alpha)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level q must be in (0, 1), got {q}")));
    }
    if !(w > 0.0) {
        return Err(Error::Domain(format!("population quantile W must be positive, got {w}")));
    }
    let quantile = interpolated_quantile(samples.as_mut_slice(), q);
    Ok(DistanceEstimate {
        d_hat: (quantile / w).powf(alpha),
        kind: EstimatorKind::Oq,
        alpha,
        clamped: false,
    })
}

/// Bias-corrected optimal quantile estimator: the raw estimate divided by
/// the Monte-Carlo factor B_(alpha, k) carried by the spec.
pub fn estimate_oq_corrected(samples: &mut SampleBuffer, spec: &EstimatorSpec) -> Result<DistanceEstimate> {
    if spec.kind != EstimatorKind::Oqc {
        return Err(Error::Config(format!("spec configures {}, not oqc", spec.kind)));
    }
    spec.estimate(samples)
}

/// Sample-median baseline: the quantile estimator pinned at q = 0.5.
pub fn estimate_median(samples: &mut SampleBuffer, alpha: f64) -> Result<DistanceEstimate> {
    let w = abs_quantile_w(0.5, alpha)?;
    let mut est = estimate_oq(samples, alpha, 0.5, w)?;
    est.kind = EstimatorKind::Median;
    Ok(est)
}

// ---------------------------------------------------------------------------
// Arithmetic mean (alpha = 2)
// ---------------------------------------------------------------------------

/// (1/2k) sum x_j^2; the 1/2 comes from Var S(2, d) = 2d under this crate's
/// characteristic-function convention.
pub fn estimate_am(samples: &mut SampleBuffer) -> Result<DistanceEstimate> {
    let k = samples.k();
    check_k(k, 1, "arithmetic mean")?;
    let sum: f64 = samples.as_slice().iter().map(|v| v * v).sum();
    Ok(DistanceEstimate {
        d_hat: sum / (2.0 * k as f64),
        kind: EstimatorKind::Am,
        alpha: 2.0,
        clamped: false,
    })
}

// ---------------------------------------------------------------------------
// Precomputed estimator specification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum Coeffs {
    Gm { k_log_coeff: f64 },
    Hm { scale: f64, correction: f64 },
    Fp(FpCoeffs),
    Quantile { q: f64, w: f64, bias: f64, root_divisor: f64 },
    Am,
}

/// An estimator with every (alpha, k)-dependent coefficient resolved ahead
/// of time, so the per-estimate work is just the sample pass itself.
#[derive(Clone, Debug)]
pub struct EstimatorSpec {
    kind: EstimatorKind,
    alpha: f64,
    k: usize,
    coeffs: Coeffs,
}

impl EstimatorSpec {
    /// Builds a spec for `kind` at (alpha, k).
    ///
    /// `calibration` supplies q*(alpha), W^alpha(q*), and — for `oqc` — the
    /// bias factor B_(alpha, k); it is required for `oqc` and optional for
    /// `oq`/`median` (without it the optimal quantile is solved on the spot,
    /// which costs more at construction time).
    pub fn new(
        kind: EstimatorKind,
        alpha: f64,
        k: usize,
        calibration: Option<&CalibrationTable>,
    ) -> Result<Self> {
        crate::stable::check_alpha(alpha)?;
        if k == 0 {
            return Err(Error::Domain("estimator requires k >= 1".into()));
        }
        let coeffs = match kind {
            EstimatorKind::Gm => {
                check_k(k, 2, "geometric mean")?;
                Coeffs::Gm { k_log_coeff: k as f64 * abs_moment(alpha / k as f64, alpha)?.ln() }
            }
            EstimatorKind::Hm => {
                if !(alpha < 0.5) {
                    return Err(Error::Domain(format!(
                        "harmonic mean estimator is supported for alpha in (0, 0.5); got {alpha}"
                    )));
                }
                let (scale, correction) = hm_coefficients(alpha)?;
                Coeffs::Hm { scale, correction }
            }
            EstimatorKind::Fp => {
                check_k(k, 2, "fractional power")?;
                Coeffs::Fp(FpCoeffs::new(alpha, solve_lambda_star(alpha)?, k)?)
            }
            EstimatorKind::Oq | EstimatorKind::Oqc | EstimatorKind::Median => {
                let q = match kind {
                    EstimatorKind::Median => 0.5,
                    _ => match calibration {
                        Some(table) => table.q_star(alpha)?,
                        None => crate::calibration::solve_q_star(alpha)?,
                    },
                };
                let w = abs_quantile_w(q, alpha)?;
                let bias = if kind == EstimatorKind::Oqc {
                    calibration
                        .ok_or_else(|| {
                            Error::CalibrationMiss("oqc requires a calibration table".into())
                        })?
                        .bias(alpha, k, true)?
                } else {
                    1.0
                };
                Coeffs::Quantile { q, w, bias, root_divisor: w * bias.powf(1.0 / alpha) }
            }
            EstimatorKind::Am => {
                if alpha != 2.0 {
                    return Err(Error::Domain(format!(
                        "arithmetic mean estimator requires alpha = 2, got {alpha}"
                    )));
                }
                Coeffs::Am
            }
        };
        Ok(Self { kind, alpha, k, coeffs })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The scale estimate d_hat for one buffer of |x| samples.
    pub fn estimate(&self, samples: &mut SampleBuffer) -> Result<DistanceEstimate> {
        if samples.k() != self.k {
            return Err(Error::Config(format!(
                "spec was built for k = {}, buffer has k = {}",
                self.k,
                samples.k()
            )));
        }
        Ok(self.estimate_slice(samples.as_mut_slice()))
    }

    /// Slice-level path shared with the simulation lab; `values` must hold
    /// exactly `self.k` absolute samples and may be permuted.
    pub(crate) fn estimate_slice(&self, values: &mut [f64]) -> DistanceEstimate {
        debug_assert_eq!(values.len(), self.k);
        match &self.coeffs {
            Coeffs::Gm { k_log_coeff } => DistanceEstimate {
                d_hat: gm_from_coeff(values, self.alpha, *k_log_coeff),
                kind: self.kind,
                alpha: self.alpha,
                clamped: false,
            },
            Coeffs::Hm { scale, correction } => {
                let mut inv_sum = 0.0;
                for &v in values.iter() {
                    inv_sum += pow_nonneg(v, -self.alpha);
                }
                DistanceEstimate {
                    d_hat: scale / inv_sum * (values.len() as f64 - correction),
                    kind: self.kind,
                    alpha: self.alpha,
                    clamped: false,
                }
            }
            Coeffs::Fp(c) => {
                let mut est = fp_from_coeffs(values, self.alpha, c);
                est.kind = self.kind;
                est
            }
            Coeffs::Quantile { q, w, bias, .. } => {
                let quantile = interpolated_quantile(values, *q);
                DistanceEstimate {
                    d_hat: pow_nonneg(quantile / w, self.alpha) / bias,
                    kind: self.kind,
                    alpha: self.alpha,
                    clamped: false,
                }
            }
            Coeffs::Am => {
                let sum: f64 = values.iter().map(|v| v * v).sum();
                DistanceEstimate {
                    d_hat: sum / (2.0 * values.len() as f64),
                    kind: self.kind,
                    alpha: self.alpha,
                    clamped: false,
                }
            }
        }
    }

    /// The metric-form estimate d_hat^(1/alpha).
    ///
    /// For the quantile family this path divides the selected sample
    /// quantile by a precomputed constant and involves no fractional power
    /// at all; other estimators apply the 1/alpha root to d_hat.
    pub fn estimate_root(&self, samples: &mut SampleBuffer) -> Result<f64> {
        if let Coeffs::Quantile { q, root_divisor, .. } = &self.coeffs {
            if samples.k() != self.k {
                return Err(Error::Config(format!(
                    "spec was built for k = {}, buffer has k = {}",
                    self.k,
                    samples.k()
                )));
            }
            let quantile = interpolated_quantile(samples.as_mut_slice(), *q);
            return Ok(quantile / root_divisor);
        }
        let est = self.estimate(samples)?;
        Ok(est.d_hat.powf(1.0 / self.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stable::sample_standard_stable;

    fn buffer(vals: &[f64]) -> SampleBuffer {
        SampleBuffer::from_samples(vals.iter().copied()).unwrap()
    }

    fn mc_mean<F: FnMut(&mut SampleBuffer) -> f64>(
        alpha: f64,
        k: usize,
        replicates: usize,
        seed: u64,
        mut f: F,
    ) -> f64 {
        let mut rng = RngStream::new(seed, 0).rng();
        let mut acc = 0.0;
        let mut raw = vec![0.0f64; k];
        for _ in 0..replicates {
            for r in raw.iter_mut() {
                *r = sample_standard_stable(alpha, &mut rng).unwrap();
            }
            let mut buf = SampleBuffer::from_samples(raw.iter().copied()).unwrap();
            acc += f(&mut buf);
        }
        acc / replicates as f64
    }

    #[test]
    fn gm_zero_and_unbiasedness() {
        assert_eq!(estimate_gm(&mut buffer(&[0.0, 0.0, 0.0]), 1.0).unwrap().d_hat, 0.0);
        // Simulation oracle for unbiasedness at d = 1.
        let mean = mc_mean(1.0, 50, 1_000_000, 21, |b| estimate_gm(b, 1.0).unwrap().d_hat);
        assert!((mean - 1.0).abs() < 0.003, "gm mean = {mean}");
    }

    #[test]
    fn gm_scale_equivariance_is_exact() {
        let alpha = 1.5;
        let c: f64 = 7.0;
        let vals = [0.3, 2.0, 5.5, 0.9, 4.2];
        let base = estimate_gm(&mut buffer(&vals), alpha).unwrap().d_hat;
        let scaled: Vec<f64> = vals.iter().map(|v| v * c.powf(1.0 / alpha)).collect();
        let scaled = estimate_gm(&mut buffer(&scaled), alpha).unwrap().d_hat;
        assert!((scaled / base - c).abs() < 1e-12 * c);
    }

    #[test]
    fn gm_needs_two_samples() {
        assert!(estimate_gm(&mut buffer(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn hm_domain_and_unbiasedness() {
        assert!(estimate_hm(&mut buffer(&[1.0, 2.0]), 1.0).is_err());
        assert!(estimate_hm(&mut buffer(&[1.0, 0.0]), 0.2).is_err());
        let mean = mc_mean(0.2, 50, 1_000_000, 22, |b| estimate_hm(b, 0.2).unwrap().d_hat);
        assert!((mean - 1.0).abs() < 0.005, "hm mean = {mean}");
    }

    #[test]
    fn hm_scale_equivariance() {
        let alpha = 0.3;
        let c: f64 = 3.0;
        let vals = [0.3, 2.0, 5.5, 0.9];
        let base = estimate_hm(&mut buffer(&vals), alpha).unwrap().d_hat;
        let scaled: Vec<f64> = vals.iter().map(|v| v * c.powf(1.0 / alpha)).collect();
        let scaled = estimate_hm(&mut buffer(&scaled), alpha).unwrap().d_hat;
        assert!((scaled / base - c).abs() < 1e-12 * c);
    }

    #[test]
    fn lambda_star_approaches_half_near_alpha_two() {
        let l = solve_lambda_star(2.0).unwrap();
        assert!(l > 0.499, "lambda*(2) = {l}");
        let l195 = solve_lambda_star(1.95).unwrap();
        assert!(l195 < 0.5 && l195 > 0.2);
    }

    #[test]
    fn lambda_star_matches_dense_grid_oracle_at_alpha_one() {
        // Brute-force grid minimizer over (-0.499, 0.499), step 1e-4.
        let alpha = 1.0;
        let mut best = (f64::INFINITY, 0.0);
        let mut l = -0.499_f64;
        while l < 0.499 {
            if l.abs() >= 1e-4 {
                let v = fp_variance_objective(l, alpha).unwrap();
                if v < best.0 {
                    best = (v, l);
                }
            }
            l += 1e-4;
        }
        let solved = solve_lambda_star(alpha).unwrap();
        assert!((solved - best.1).abs() < 1e-3, "golden {solved} vs grid {}", best.1);
    }

    #[test]
    fn lambda_star_respects_constraint_over_alpha_grid() {
        for i in 1..=20 {
            let alpha = i as f64 * 0.1;
            let l = solve_lambda_star(alpha).unwrap();
            assert!(l > -1.0 / (2.0 * alpha) && l < 0.5, "alpha={alpha} lambda={l}");
        }
    }

    #[test]
    fn fp_beats_gm_mse_at_small_alpha() {
        // Downscaled version of the Fig. 5 comparison at alpha = 0.5, k = 50:
        // fractional power should have smaller MSE than geometric mean.
        let alpha = 0.5;
        let k = 50;
        let lambda = solve_lambda_star(alpha).unwrap();
        let mut rng = RngStream::new(23, 0).rng();
        let (mut mse_fp, mut mse_gm) = (0.0, 0.0);
        let reps = 300_000;
        let mut raw = vec![0.0f64; k];
        for _ in 0..reps {
            for r in raw.iter_mut() {
                *r = sample_standard_stable(alpha, &mut rng).unwrap();
            }
            let mut buf = SampleBuffer::from_samples(raw.iter().copied()).unwrap();
            let fp = estimate_fp(&mut buf, alpha, lambda).unwrap().d_hat;
            let gm = estimate_gm(&mut buf, alpha).unwrap().d_hat;
            mse_fp += (fp - 1.0) * (fp - 1.0);
            mse_gm += (gm - 1.0) * (gm - 1.0);
        }
        assert!(mse_fp < mse_gm, "fp {mse_fp} vs gm {mse_gm}");
    }

    #[test]
    fn fp_scale_equivariance() {
        let alpha = 0.8;
        let lambda = solve_lambda_star(alpha).unwrap();
        let c: f64 = 2.0;
        let vals = [0.3, 2.0, 5.5, 0.9, 1.1];
        let base = estimate_fp(&mut buffer(&vals), alpha, lambda).unwrap().d_hat;
        let scaled: Vec<f64> = vals.iter().map(|v| v * c.powf(1.0 / alpha)).collect();
        let scaled = estimate_fp(&mut buffer(&scaled), alpha, lambda).unwrap().d_hat;
        assert!((scaled / base - c).abs() < 1e-12 * c);
    }

    #[test]
    fn fp_all_zero_samples() {
        let lambda = solve_lambda_star(0.8).unwrap();
        assert_eq!(estimate_fp(&mut buffer(&[0.0; 5]), 0.8, lambda).unwrap().d_hat, 0.0);
    }

    #[test]
    fn oq_trivial_examples() {
        let est = estimate_oq(&mut buffer(&[0.5, 1.0, 2.0]), 1.0, 0.5, 1.0).unwrap();
        assert_eq!(est.d_hat, 1.0);
        // Constant samples W sqrt(c) at alpha = 2 recover c exactly.
        let w = abs_quantile_w(0.862, 2.0).unwrap();
        let c = 3.7_f64;
        let vals = vec![w * c.sqrt(); 9];
        let est = estimate_oq(&mut buffer(&vals), 2.0, 0.862, w).unwrap();
        assert!((est.d_hat - c).abs() < 1e-12);
    }

    #[test]
    fn oq_single_replicate_large_k() {
        // Asymptotic sd at alpha = 1, q = 0.5 is sqrt(pi^2/4 / k) ~ 0.0157.
        let w = abs_quantile_w(0.5, 1.0).unwrap();
        let mut rng = RngStream::new(24, 0).rng();
        let vals: Vec<f64> =
            (0..10_000).map(|_| sample_standard_stable(1.0, &mut rng).unwrap()).collect();
        let est = estimate_oq(&mut buffer(&vals), 1.0, 0.5, w).unwrap();
        assert!((est.d_hat - 1.0).abs() < 0.05, "got {}", est.d_hat);
    }

    #[test]
    fn median_equals_oq_at_half() {
        let alpha = 1.0;
        let w = abs_quantile_w(0.5, alpha).unwrap();
        let mut rng = RngStream::new(25, 0).rng();
        for _ in 0..50 {
            let vals: Vec<f64> =
                (0..37).map(|_| sample_standard_stable(alpha, &mut rng).unwrap()).collect();
            let a = estimate_oq(&mut buffer(&vals), alpha, 0.5, w).unwrap().d_hat;
            let b = estimate_median(&mut buffer(&vals), alpha).unwrap().d_hat;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn median_has_larger_mse_than_oq_at_alpha_two() {
        // Eq.-(6)-style comparison via simulation at alpha = 2.
        let alpha = 2.0;
        let q_star = crate::calibration::solve_q_star(alpha).unwrap();
        let w_star = abs_quantile_w(q_star, alpha).unwrap();
        let k = 100;
        let reps = 100_000;
        let mut rng = RngStream::new(26, 0).rng();
        let (mut mse_med, mut mse_oq) = (0.0, 0.0);
        let mut raw = vec![0.0f64; k];
        for _ in 0..reps {
            for r in raw.iter_mut() {
                *r = sample_standard_stable(alpha, &mut rng).unwrap();
            }
            let mut buf = SampleBuffer::from_samples(raw.iter().copied()).unwrap();
            let m = estimate_median(&mut buf, alpha).unwrap().d_hat;
            let o = estimate_oq(&mut buf, alpha, q_star, w_star).unwrap().d_hat;
            mse_med += (m - 1.0) * (m - 1.0);
            mse_oq += (o - 1.0) * (o - 1.0);
        }
        assert!(mse_oq < mse_med, "oq {mse_oq} vs median {mse_med}");
    }

    #[test]
    fn am_examples() {
        let s2 = std::f64::consts::SQRT_2;
        assert!((estimate_am(&mut buffer(&[s2, s2])).unwrap().d_hat - 1.0).abs() < 1e-15);
        assert_eq!(estimate_am(&mut buffer(&[0.0; 4])).unwrap().d_hat, 0.0);
        let mean = mc_mean(2.0, 50, 1_000_000, 27, |b| estimate_am(b).unwrap().d_hat);
        assert!((mean - 1.0).abs() < 0.002, "am mean = {mean}");
    }

    #[test]
    fn spec_validates_domains() {
        assert!(EstimatorSpec::new(EstimatorKind::Am, 1.5, 10, None).is_err());
        assert!(EstimatorSpec::new(EstimatorKind::Hm, 0.7, 10, None).is_err());
        assert!(EstimatorSpec::new(EstimatorKind::Gm, 1.0, 1, None).is_err());
        assert!(EstimatorSpec::new(EstimatorKind::Oqc, 1.0, 10, None).is_err());
    }

    #[test]
    fn all_zero_samples_give_zero_for_scale_free_estimators() {
        let zeros = [0.0; 8];
        assert_eq!(estimate_gm(&mut buffer(&zeros), 1.3).unwrap().d_hat, 0.0);
        let w = abs_quantile_w(0.5, 1.3).unwrap();
        assert_eq!(estimate_oq(&mut buffer(&zeros), 1.3, 0.5, w).unwrap().d_hat, 0.0);
        assert_eq!(estimate_am(&mut buffer(&zeros)).unwrap().d_hat, 0.0);
    }

    #[test]
    fn estimate_root_skips_powers_for_quantile_family() {
        let spec = EstimatorSpec::new(EstimatorKind::Median, 1.5, 5, None).unwrap();
        let vals = [0.4, 1.0, 3.0, 0.2, 2.0];
        let root = spec.estimate_root(&mut buffer(&vals)).unwrap();
        let d = spec.estimate(&mut buffer(&vals)).unwrap().d_hat;
        assert!((root - d.powf(1.0 / 1.5)).abs() < 1e-12 * root.max(1.0));
    }

    #[test]
    fn determinism_same_buffer_same_spec() {
        let spec = EstimatorSpec::new(EstimatorKind::Gm, 0.7, 6, None).unwrap();
        let vals = [0.4, 1.0, 3.0, 0.2, 2.0, 0.9];
        let a = spec.estimate(&mut buffer(&vals)).unwrap().d_hat;
        let b = spec.estimate(&mut buffer(&vals)).unwrap().d_hat;
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
