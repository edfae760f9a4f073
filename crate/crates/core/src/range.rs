//! Private range of Gaussian data with known scale, private scale estimation
//! from pairwise differences, and their composition for unknown scale.
//!
//! The sample-size gates are explicit: each stage needs its histogram to be
//! accurate to `beta` (0.05 for the location histogram, 0.005 for the scale
//! histogram), and [`required_n`] turns that into a concrete `n`.

use serde::{Deserialize, Serialize};

use crate::distributions::NoiseSource;
use crate::error::{Error, Result};
pub use crate::histogram::fixed_bin_index;
use crate::histogram::{
    ceil_log2, counts_of, floor_log2, heaviest_bin, laplace_histogram, required_n, select_mechanism,
    stability_histogram, BinningScheme, MAX_DENSE_BINS,
};
use crate::model::{check_range_bound, split_budget_halves, MechanismTag, ParameterBounds, PrivacyBudget, Sample};

/// Histogram accuracy needed by the location stage.
pub const LOCATION_BETA: f64 = 0.05;
/// Histogram accuracy needed by the scale stage.
pub const SCALE_BETA: f64 = 0.005;

/// Whether the sample-size gate is enforced. `Bypass` runs the estimator
/// regardless, which is only useful for studying it below its guarantee.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatePolicy {
    #[default]
    Enforce,
    Bypass,
}

/// Outcome of a sample-size gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub passed: bool,
    pub n: u64,
    /// Smallest `n` the gate accepts (saturating).
    pub required: u64,
    /// Histogram mechanism the stage dispatches to.
    pub mechanism: MechanismTag,
}

impl GateCheck {
    fn into_result(self, policy: GatePolicy) -> Result<Self> {
        if self.passed || policy == GatePolicy::Bypass {
            Ok(self)
        } else {
            Err(Error::GateNotMet { n: self.n, required: self.required as f64 })
        }
    }

    fn and(self, other: GateCheck) -> GateCheck {
        GateCheck {
            passed: self.passed && other.passed,
            n: self.n,
            required: self.required.max(other.required),
            mechanism: other.mechanism,
        }
    }
}

/// Shared gate logic: `n >= required_n(K, budget, alpha, beta)`, and for the
/// stability branch additionally `delta < 1/n`.
fn histogram_gate(n: u64, k: f64, budget: &PrivacyBudget, alpha: f64, beta: f64) -> Result<GateCheck> {
    let required = required_n(k, budget, alpha, beta)?;
    let mechanism = select_mechanism(k, budget.delta);
    // The stability mechanism is only defined for delta < 1/n.
    let delta_ok = mechanism == MechanismTag::LaplaceHist || budget.delta * (n as f64) < 1.0;
    Ok(GateCheck { passed: n >= required && n > 0 && delta_ok, n, required, mechanism })
}

fn check_unit_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be finite and positive, got {sigma}")));
    }
    Ok(())
}

/// `K = 2⌈R/sigma⌉ + 1` as an extended real.
fn location_bin_count(sigma: f64, big_r: f64) -> f64 {
    2.0 * (big_r / sigma).ceil() + 1.0
}

/// Gate of [`range_known_sigma`].
pub fn range_known_gate(n: u64, sigma: f64, budget: &PrivacyBudget, alpha: f64, big_r: f64) -> Result<GateCheck> {
    check_sigma(sigma)?;
    check_unit_alpha(alpha)?;
    check_range_bound(budget, big_r)?;
    histogram_gate(n, location_bin_count(sigma, big_r), budget, alpha / 2.0, LOCATION_BETA)
}

/// Dyadic index range covering scales in `(sigma_min, sigma_max)`; `None`
/// when either end is unbounded.
pub fn scale_bin_range(sigma_min: f64, sigma_max: f64) -> Option<(i64, i64)> {
    let lo = floor_log2(sigma_min)? - 2;
    let hi = ceil_log2(sigma_max)? + 1;
    Some((lo, hi))
}

fn check_scale_bounds(budget: &PrivacyBudget, sigma_min: f64, sigma_max: f64) -> Result<()> {
    if !(sigma_min.is_finite() && sigma_min >= 0.0) || sigma_max.is_nan() || sigma_max <= sigma_min {
        return Err(Error::invalid(format!(
            "need 0 <= sigma_min < sigma_max, got ({sigma_min}, {sigma_max})"
        )));
    }
    if budget.is_pure() && (sigma_min == 0.0 || sigma_max.is_infinite()) {
        return Err(Error::UnsupportedPureDpUnbounded(
            "delta = 0 requires 0 < sigma_min and finite sigma_max".into(),
        ));
    }
    Ok(())
}

/// Gate of [`sigma_estimate`], evaluated on the `⌊n/2⌋` pairs.
pub fn sigma_gate(n: u64, budget: &PrivacyBudget, alpha: f64, sigma_min: f64, sigma_max: f64) -> Result<GateCheck> {
    check_unit_alpha(alpha)?;
    check_scale_bounds(budget, sigma_min, sigma_max)?;
    let k = scale_bin_range(sigma_min, sigma_max).map_or(f64::INFINITY, |(lo, hi)| (hi - lo + 1) as f64);
    let mut gate = histogram_gate(n / 2, k, budget, alpha, SCALE_BETA)?;
    gate.n = n;
    gate.required = gate.required.saturating_mul(2);
    gate.passed = gate.passed && n >= 2;
    Ok(gate)
}

/// Gate of [`range_unknown_sigma`]: both stages must pass under their half
/// budgets. The location stage is checked at the smallest scale the scale
/// stage can return, `2^⌊log2 sigma_min⌋`.
pub fn range_unknown_gate(n: u64, budget: &PrivacyBudget, alpha: f64, bounds: &ParameterBounds) -> Result<GateCheck> {
    check_unit_alpha(alpha)?;
    check_range_bound(budget, bounds.big_r)?;
    let halves = split_budget_halves(*budget)?;
    let scale = sigma_gate(n, &halves.part(0), alpha / 2.0, bounds.sigma_min, bounds.sigma_max)?;
    let k = match floor_log2(bounds.sigma_min) {
        Some(e) => location_bin_count(2f64.powi(e as i32), bounds.big_r),
        None => f64::INFINITY,
    };
    let location = histogram_gate(n, k, &halves.part(1), alpha / 4.0, LOCATION_BETA)?;
    Ok(scale.and(location))
}

/// Private window `[x_min, x_max]` of fixed width `width_w0` around the
/// heaviest location bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub x_min: f64,
    pub x_max: f64,
    pub l_hat: i64,
    /// `8 sigma sqrt(log(n/alpha))`, computed from the inputs alone.
    pub width_w0: f64,
    pub sigma_used: f64,
    pub mechanism: MechanismTag,
    pub gate_passed: bool,
}

/// Scale estimate on the dyadic grid: `sigma_hat = 2^(l_hat + 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma_hat: f64,
    pub l_hat: i64,
    /// Pairs with identical values; they fall in no dyadic bin.
    pub zero_pairs: u64,
    pub mechanism: MechanismTag,
    pub gate_passed: bool,
}

/// `4 sigma sqrt(log(n/alpha))`.
pub fn range_half_width(n: u64, sigma: f64, alpha: f64) -> f64 {
    4.0 * sigma * ((n as f64 / alpha).ln()).sqrt()
}

/// `8 sigma sqrt(log(n/alpha))`.
pub fn range_width(n: u64, sigma: f64, alpha: f64) -> f64 {
    8.0 * sigma * ((n as f64 / alpha).ln()).sqrt()
}

/// Private range of data drawn from `N(mu, sigma0^2)` with `sigma0 <= sigma`
/// and `|mu| < big_r`: histogram the data on bins of width `sigma`, take the
/// heaviest bin `l`, and return `sigma l ± 4 sigma sqrt(log(n/alpha))`.
pub fn range_known_sigma<R: NoiseSource + ?Sized>(
    s: &Sample,
    sigma: f64,
    budget: &PrivacyBudget,
    alpha: f64,
    big_r: f64,
    rng: &mut R,
) -> Result<RangeEstimate> {
    range_known_sigma_with(s, sigma, budget, alpha, big_r, GatePolicy::Enforce, rng)
}

pub fn range_known_sigma_with<R: NoiseSource + ?Sized>(
    s: &Sample,
    sigma: f64,
    budget: &PrivacyBudget,
    alpha: f64,
    big_r: f64,
    policy: GatePolicy,
    rng: &mut R,
) -> Result<RangeEstimate> {
    PrivacyBudget::new(budget.epsilon, budget.delta)?;
    let n = s.n() as u64;
    let gate = range_known_gate(n, sigma, budget, alpha, big_r)?.into_result(policy)?;
    let hist = match gate.mechanism {
        MechanismTag::LaplaceHist => {
            let r = (big_r / sigma).ceil();
            if 2.0 * r + 1.0 > MAX_DENSE_BINS as f64 {
                return Err(Error::Overflow(format!(
                    "R/sigma = {} needs more than 2^32 bins",
                    big_r / sigma
                )));
            }
            let scheme = BinningScheme::fixed_width_symmetric(sigma, r as i64)?;
            laplace_histogram(&counts_of(s.values(), &scheme), &scheme, budget, rng)?
        }
        MechanismTag::StabilityHist => {
            let scheme = BinningScheme::fixed_width(sigma, None)?;
            stability_histogram(&counts_of(s.values(), &scheme), budget, rng)?
        }
    };
    let l_hat = heaviest_bin(&hist)
        .ok_or_else(|| Error::EstimationFailed("no location bin survived the threshold".into()))?;
    let center = sigma * l_hat as f64;
    let half = range_half_width(n, sigma, alpha);
    Ok(RangeEstimate {
        x_min: center - half,
        x_max: center + half,
        l_hat,
        width_w0: range_width(n, sigma, alpha),
        sigma_used: sigma,
        mechanism: gate.mechanism,
        gate_passed: gate.passed,
    })
}

/// Private scale estimate satisfying `sigma <= sigma_hat <= 8 sigma` with
/// probability `1 - alpha` once the gate holds. Uses the `⌊n/2⌋` absolute
/// differences of consecutive pairs; an odd trailing point is unused.
pub fn sigma_estimate<R: NoiseSource + ?Sized>(
    s: &Sample,
    budget: &PrivacyBudget,
    alpha: f64,
    sigma_min: f64,
    sigma_max: f64,
    rng: &mut R,
) -> Result<SigmaEstimate> {
    sigma_estimate_with(s, budget, alpha, sigma_min, sigma_max, GatePolicy::Enforce, rng)
}

pub fn sigma_estimate_with<R: NoiseSource + ?Sized>(
    s: &Sample,
    budget: &PrivacyBudget,
    alpha: f64,
    sigma_min: f64,
    sigma_max: f64,
    policy: GatePolicy,
    rng: &mut R,
) -> Result<SigmaEstimate> {
    PrivacyBudget::new(budget.epsilon, budget.delta)?;
    let n = s.n() as u64;
    let gate = sigma_gate(n, budget, alpha, sigma_min, sigma_max)?;
    if n < 2 {
        return Err(Error::GateNotMet { n, required: gate.required.max(2) as f64 });
    }
    let gate = gate.into_result(policy)?;
    let diffs: Vec<f64> = s.values().chunks_exact(2).map(|p| (p[1] - p[0]).abs()).collect();
    let hist = match gate.mechanism {
        MechanismTag::LaplaceHist => {
            let scheme = BinningScheme::dyadic(scale_bin_range(sigma_min, sigma_max))?;
            let counts = counts_of(&diffs, &scheme);
            let zero_pairs = counts.unbinned;
            (laplace_histogram(&counts, &scheme, budget, rng)?, zero_pairs)
        }
        MechanismTag::StabilityHist => {
            let counts = counts_of(&diffs, &BinningScheme::dyadic(None)?);
            let zero_pairs = counts.unbinned;
            (stability_histogram(&counts, budget, rng)?, zero_pairs)
        }
    };
    let (hist, zero_pairs) = hist;
    let l_hat = heaviest_bin(&hist)
        .ok_or_else(|| Error::EstimationFailed("no scale bin survived the threshold".into()))?;
    let exp = i32::try_from(l_hat + 2).map_err(|_| Error::Overflow(format!("scale bin {l_hat}")))?;
    Ok(SigmaEstimate {
        sigma_hat: 2f64.powi(exp),
        l_hat,
        zero_pairs,
        mechanism: gate.mechanism,
        gate_passed: gate.passed,
    })
}

/// Private range when the scale is unknown: half of the budget and of
/// `alpha` go to [`sigma_estimate`], the other halves to
/// [`range_known_sigma`] at `sigma = sigma_hat`.
pub fn range_unknown_sigma<R: NoiseSource + ?Sized>(
    s: &Sample,
    budget: &PrivacyBudget,
    alpha: f64,
    bounds: &ParameterBounds,
    rng: &mut R,
) -> Result<(SigmaEstimate, RangeEstimate)> {
    range_unknown_sigma_with(s, budget, alpha, bounds, GatePolicy::Enforce, rng)
}

pub fn range_unknown_sigma_with<R: NoiseSource + ?Sized>(
    s: &Sample,
    budget: &PrivacyBudget,
    alpha: f64,
    bounds: &ParameterBounds,
    policy: GatePolicy,
    rng: &mut R,
) -> Result<(SigmaEstimate, RangeEstimate)> {
    let n = s.n() as u64;
    let gate = range_unknown_gate(n, budget, alpha, bounds)?.into_result(policy)?;
    let halves = split_budget_halves(*budget)?;
    let mut scale = sigma_estimate_with(
        s,
        &halves.part(0),
        alpha / 2.0,
        bounds.sigma_min,
        bounds.sigma_max,
        GatePolicy::Bypass,
        rng,
    )?;
    let mut range =
        range_known_sigma_with(s, scale.sigma_hat, &halves.part(1), alpha / 2.0, bounds.big_r, GatePolicy::Bypass, rng)?;
    scale.gate_passed = gate.passed;
    range.gate_passed = gate.passed;
    Ok((scale, range))
}
