//! Exponential error (tail) bounds for the quantile estimators and the
//! sample-size planner built on them.
//!
//! For the q-quantile estimator the right/left deviation probabilities obey
//!
//! ```text
//! Pr(d_hat >= (1+eps) d) <= exp(-k eps^2 / G_R)
//! Pr(d_hat <= (1-eps) d) <= exp(-k eps^2 / G_L)     (0 < eps < 1)
//! ```
//!
//! with
//!
//! ```text
//! eps^2/G_R = -(1-q) ln(2 - 2 F_R) - q ln(2 F_R - 1) + (1-q) ln(1-q) + q ln q
//! F_R = F_X((1+eps)^(1/alpha) W; alpha, 1)
//! ```
//!
//! and the mirror-image expression for G_L at (1-eps)^(1/alpha) W. As
//! eps -> 0 both constants converge to twice the asymptotic variance factor,
//! which is also the numerically stable fallback when the expression above
//! cancels out at tiny eps.
//!
//! The planner inverts the bound: k >= G/eps^2 (2 ln n - ln delta) makes all
//! n^2/2 pairwise estimates (1 +- eps)-accurate with probability 1 - delta,
//! and the fraction regime replaces the Bonferroni term by ln(2T) - ln delta.

use crate::calibration::variance_factor;
use crate::error::{Error, Result};
use crate::stable::{abs_quantile_w, check_alpha, stable_cdf};
use serde::Serialize;

/// Below this eps, tail constants are evaluated by the limit expression
/// whenever the direct formula degenerates.
const LIMIT_FALLBACK_EPS: f64 = 1e-6;

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level q must be in (0, 1), got {q}")));
    }
    Ok(())
}

fn tail_expression(q: f64, f_val: f64) -> f64 {
    -(1.0 - q) * (2.0 - 2.0 * f_val).ln() - q * (2.0 * f_val - 1.0).ln()
        + (1.0 - q) * (1.0 - q).ln()
        + q * q.ln()
}

fn constant_from_expression(q: f64, alpha: f64, epsilon: f64, f_val: f64) -> Result<f64> {
    let expr = tail_expression(q, f_val);
    if expr > 0.0 {
        return Ok(epsilon * epsilon / expr);
    }
    if epsilon <= LIMIT_FALLBACK_EPS {
        // Floating cancellation; the eps -> 0 limit is twice the
        // asymptotic variance factor.
        return Ok(2.0 * variance_factor(q, alpha)?);
    }
    Err(Error::Degenerate(format!(
        "tail-bound expression not positive at q = {q}, alpha = {alpha}, eps = {epsilon}"
    )))
}

/// Right tail-bound constant G_R(q, alpha, eps), eps > 0.
pub fn tail_constant_right(q: f64, alpha: f64, epsilon: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_q(q)?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("right tail requires eps > 0, got {epsilon}")));
    }
    let w = abs_quantile_w(q, alpha)?;
    let f_r = stable_cdf((1.0 + epsilon).powf(1.0 / alpha) * w, alpha)?;
    if f_r <= 0.5 {
        return Err(Error::Degenerate(format!(
            "cdf at the right deviation point fell at or below 1/2 (F_R = {f_r})"
        )));
    }
    constant_from_expression(q, alpha, epsilon, f_r)
}

/// Left tail-bound constant G_L(q, alpha, eps), 0 < eps < 1.
pub fn tail_constant_left(q: f64, alpha: f64, epsilon: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_q(q)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "left tail requires 0 < eps < 1, got {epsilon}"
        )));
    }
    let w = abs_quantile_w(q, alpha)?;
    let f_l = stable_cdf((1.0 - epsilon).powf(1.0 / alpha) * w, alpha)?;
    constant_from_expression(q, alpha, epsilon, f_l)
}

/// How the error budget delta is allocated across pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "regime", content = "size")]
pub enum PlanRegime {
    /// Bonferroni over all n^2/2 pairwise distances of n points.
    BonferroniN(u64),
    /// All but a 1/T fraction of pairs.
    FractionT(f64),
}

/// A tail-bound evaluation plus the planned sample size.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailBoundReport {
    pub alpha: f64,
    pub q: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub g_right: f64,
    /// Absent when eps >= 1: the left deviation (1-eps)d is then vacuous.
    pub g_left: Option<f64>,
    /// max(G_R, G_L); the constant the planner uses.
    pub g: f64,
    pub k_planned: u64,
    #[serde(flatten)]
    pub regime: PlanRegime,
}

/// Sample size from an explicitly supplied constant G.
pub fn plan_with_constant(g: f64, epsilon: f64, delta: f64, regime: PlanRegime) -> Result<u64> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!("G must be positive and finite, got {g}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must be in (0, 1), got {delta}")));
    }
    let budget = match regime {
        PlanRegime::BonferroniN(n) => {
            if n == 0 {
                return Err(Error::Domain("n must be >= 1".into()));
            }
            2.0 * (n as f64).ln() - delta.ln()
        }
        PlanRegime::FractionT(t) => {
            if !(t >= 1.0) {
                return Err(Error::Domain(format!("T must be >= 1, got {t}")));
            }
            (2.0 * t).ln() - delta.ln()
        }
    };
    Ok(((g / (epsilon * epsilon)) * budget).ceil().max(1.0) as u64)
}

/// Evaluates both tail constants at the target eps and plans the number of
/// projections with G = max(G_R, G_L).
pub fn plan_sample_size(
    alpha: f64,
    q: f64,
    epsilon: f64,
    delta: f64,
    regime: PlanRegime,
) -> Result<TailBoundReport> {
    let g_right = tail_constant_right(q, alpha, epsilon)?;
    let g_left = if epsilon < 1.0 {
        Some(tail_constant_left(q, alpha, epsilon)?)
    } else {
        None
    };
    let g = g_left.map_or(g_right, |l| l.max(g_right));
    let k_planned = plan_with_constant(g, epsilon, delta, regime)?;
    Ok(TailBoundReport {
        alpha,
        q,
        epsilon,
        delta,
        g_right,
        g_left,
        g,
        k_planned,
        regime,
    })
}

/// Which binomial tail a Chernoff bound covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailSide {
    Right,
    Left,
}

/// The original binomial Chernoff bound for X ~ Bin(k, p):
///
/// ```text
/// Pr(X >= (1+e') k p) <= [ ((1-p)/(1-(1+e')p))^(1-(1+e')p) (1+e')^(-(1+e')p) ]^k
/// Pr(X <= (1-e') k p) <= [ ((1-p)/(1-(1-e')p))^(1-(1-e')p) (1-e')^(-(1-e')p) ]^k
/// ```
///
/// Exposed for the test harness; the tail-bound lemma instantiates these at
/// the empirical-cdf binomial.
pub fn binomial_chernoff_check(k: u64, p: f64, eps_prime: f64, side: TailSide) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must be in (0, 1), got {p}")));
    }
    let shifted = match side {
        TailSide::Right => {
            if !(eps_prime > 0.0) {
                return Err(Error::Domain(format!(
                    "right tail requires eps' > 0, got {eps_prime}"
                )));
            }
            (1.0 + eps_prime) * p
        }
        TailSide::Left => {
            if !(eps_prime > 0.0 && eps_prime < 1.0) {
                return Err(Error::Domain(format!(
                    "left tail requires 0 < eps' < 1, got {eps_prime}"
                )));
            }
            (1.0 - eps_prime) * p
        }
    };
    if shifted > 1.0 {
        return Err(Error::Domain(format!(
            "(1+eps') p = {shifted} exceeds 1; the deviation event is empty"
        )));
    }
    let factor = match side {
        TailSide::Right => 1.0 + eps_prime,
        TailSide::Left => 1.0 - eps_prime,
    };
    // ln bound / k, with the (1 - shifted) ln(...) term vanishing at the
    // boundary shifted == 1.
    let mut ln_per_trial = -shifted * factor.ln();
    if shifted < 1.0 {
        ln_per_trial += (1.0 - shifted) * ((1.0 - p) / (1.0 - shifted)).ln();
    }
    Ok((k as f64 * ln_per_trial).exp().min(1.0))
}
