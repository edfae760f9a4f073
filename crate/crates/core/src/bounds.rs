//! Closed-form lower bounds on the width and sample size of private
//! confidence intervals, and on the width of non-private ones.
//!
//! The underlying results hold up to unspecified universal constants. These
//! evaluators plug in the explicit constants that appear in the arguments
//! (1/24, 1/6, 1/4), so the numbers are one concrete instantiation, useful
//! for sanity-checking measured widths rather than as sharp limits.

use serde::{Deserialize, Serialize};

use crate::distributions::std_normal_quantile;
use crate::error::{Error, Result};
use crate::model::{check_alpha, ext_real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingBranch {
    PrivacyTerm,
    RangeTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthFloor {
    pub width_floor: f64,
    pub binding_branch: BindingBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    #[serde(with = "ext_real")]
    pub width_floor: f64,
    pub binding_branch: BindingBranch,
    pub n_floor_alpha: u64,
    pub n_floor_range: u64,
    /// Whether `delta < alpha / (2n)`, the regime the width floor assumes.
    pub delta_regime_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonPrivateFloor {
    /// `(2 sigma / sqrt n) z_{1-alpha/2}`.
    pub leading_term: f64,
    /// `log(n) / n`, the shape of the lower-order correction. Informative
    /// only: its constant is unknown.
    pub correction_hint: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("{name} must be finite and positive, got {v}")));
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(())
}

/// True when `delta < alpha / (2n)`.
pub fn width_floor_applies(delta: f64, n: u64, alpha: f64) -> bool {
    delta < alpha / (2.0 * n as f64)
}

/// Width below which no `(eps, delta)`-DP interval with `delta < alpha/(2n)`
/// can have coverage `1 - alpha` for all `|mu| < R`:
/// `sigma/(24 eps n) log(1/(4 alpha))` when
/// `2R >= sigma/(6 eps n) log(1/(4 alpha))`, and `R/2` otherwise.
pub fn private_width_lower_bound(sigma: f64, epsilon: f64, n: u64, alpha: f64, big_r: f64) -> Result<WidthFloor> {
    check_positive("sigma", sigma)?;
    check_positive("epsilon", epsilon)?;
    check_n(n)?;
    check_alpha(alpha)?;
    if big_r.is_nan() || big_r <= 0.0 {
        return Err(Error::invalid(format!("R must be positive (or inf), got {big_r}")));
    }
    // Vanishes (rather than going negative) for alpha >= 1/4.
    let log_term = (1.0 / (4.0 * alpha)).ln().max(0.0);
    let scale = sigma / (epsilon * n as f64);
    Ok(if 2.0 * big_r >= scale / 6.0 * log_term {
        WidthFloor { width_floor: scale / 24.0 * log_term, binding_branch: BindingBranch::PrivacyTerm }
    } else {
        WidthFloor { width_floor: big_r / 2.0, binding_branch: BindingBranch::RangeTerm }
    })
}

fn sixth_ceil(v: f64) -> u64 {
    (v / 6.0).max(0.0).ceil() as u64
}

/// Sample sizes below which a private interval cannot beat the trivial one:
/// `⌈(1/6) min(log(1/(4 alpha)), log(1/delta)) / eps⌉` and
/// `⌈(1/6) min(log(R/sigma), log(1/delta)) / eps⌉` (0 when `R <= sigma`).
/// `delta = 0` makes the delta terms infinite; results saturate.
pub fn private_sample_lower_bound(sigma: f64, epsilon: f64, delta: f64, alpha: f64, big_r: f64) -> Result<(u64, u64)> {
    check_positive("sigma", sigma)?;
    check_positive("epsilon", epsilon)?;
    check_alpha(alpha)?;
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta must lie in [0, 1), got {delta}")));
    }
    if big_r.is_nan() || big_r <= 0.0 {
        return Err(Error::invalid(format!("R must be positive (or inf), got {big_r}")));
    }
    let delta_log = (1.0 / delta).ln();
    let alpha_floor = sixth_ceil((1.0 / (4.0 * alpha)).ln().min(delta_log) / epsilon);
    let range_floor = sixth_ceil((big_r / sigma).ln().min(delta_log) / epsilon);
    Ok((alpha_floor, range_floor))
}

/// Width floor together with both sample-size floors.
pub fn lower_bound_report(
    sigma: f64,
    epsilon: f64,
    delta: f64,
    n: u64,
    alpha: f64,
    big_r: f64,
) -> Result<LowerBoundReport> {
    let w = private_width_lower_bound(sigma, epsilon, n, alpha, big_r)?;
    let (n_floor_alpha, n_floor_range) = private_sample_lower_bound(sigma, epsilon, delta, alpha, big_r)?;
    Ok(LowerBoundReport {
        width_floor: w.width_floor,
        binding_branch: w.binding_branch,
        n_floor_alpha,
        n_floor_range,
        delta_regime_holds: width_floor_applies(delta, n, alpha),
    })
}

/// Leading term of the non-private width floor, which coincides with the
/// width of the classical z interval.
pub fn nonprivate_width_lower_bound(sigma: f64, n: u64, alpha: f64) -> Result<NonPrivateFloor> {
    check_positive("sigma", sigma)?;
    check_n(n)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n_f = n as f64;
    Ok(NonPrivateFloor {
        leading_term: 2.0 * sigma / n_f.sqrt() * std_normal_quantile(1.0 - alpha / 2.0)?,
        correction_hint: n_f.ln() / n_f,
    })
}
