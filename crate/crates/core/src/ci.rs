//! Private confidence intervals for the mean of normal data, with known or
//! unknown variance, and their classical non-private counterparts.
//!
//! Both private intervals clamp the data into a privately estimated range,
//! add Laplace noise to the clamped mean, and widen the classical interval by
//! a high-probability bound on that noise. When the sample-size gate fails
//! they return the whole parameter range `(-R, R)`, which covers trivially.

use serde::{Deserialize, Serialize};

use crate::distributions::{std_normal_quantile, student_t_quantile, NoiseSource, RngStream};
use crate::error::{Error, Result};
use crate::model::{
    check_alpha, check_range_bound, clamp_sample, split_budget, validate_inputs, BudgetSplit, CiReport,
    ConfidenceSplit, IntervalEstimate, MechanismTag, ParameterBounds, PrivacyBudget, Sample,
};
use crate::range::{
    range_known_gate, range_known_sigma_with, range_unknown_gate, range_unknown_sigma_with, range_width,
    GatePolicy, RangeEstimate, SigmaEstimate,
};

/// How `alpha` is divided among the error sources.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Equal shares.
    #[default]
    Basic,
    /// Noise shares shrinking like `1/sqrt(n)`, so the width approaches the
    /// non-private one with an additive `O~(1/n)` excess.
    FiniteSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownVarRequest {
    pub sample: Sample,
    pub sigma: f64,
    pub budget: PrivacyBudget,
    pub alpha: f64,
    #[serde(with = "crate::model::ext_real")]
    pub big_r: f64,
    pub split_mode: SplitMode,
    pub seed: u64,
    #[serde(default)]
    pub gate_policy: GatePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnknownVarRequest {
    pub sample: Sample,
    pub budget: PrivacyBudget,
    pub alpha: f64,
    pub bounds: ParameterBounds,
    pub split_mode: SplitMode,
    pub seed: u64,
    #[serde(default)]
    pub gate_policy: GatePolicy,
}

/// Intermediate private statistics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyMoments {
    pub mu_tilde: f64,
    /// Laplace draw added to the clamped mean.
    pub z1: f64,
    pub b1: f64,
    /// Variance of the clamped data around `mu_tilde` (unknown variance only).
    pub s1_sq: Option<f64>,
    /// Laplace draw added to `s1_sq`.
    pub z2: Option<f64>,
    pub b2: Option<f64>,
    /// Noisy upward-biased variance after the clamp rule.
    pub s_tilde_sq: Option<f64>,
}

/// A report together with the intermediate quantities that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRun {
    pub report: CiReport,
    pub range: Option<RangeEstimate>,
    pub scale: Option<SigmaEstimate>,
    pub moments: Option<NoisyMoments>,
}

fn check_n(n: u64, min: u64, what: &str) -> Result<()> {
    if n < min {
        return Err(Error::invalid(format!("{what} needs n >= {min}, got {n}")));
    }
    Ok(())
}

/// Build a split whose `alpha0` absorbs the rounding residue, nudged until
/// the left-to-right sum reproduces `alpha`.
fn with_residue(alpha: f64, a1: f64, a2: f64, a3: f64) -> ConfidenceSplit {
    let mut split = ConfidenceSplit { alpha0: alpha - (a1 + a2 + a3), alpha1: a1, alpha2: a2, alpha3: a3 };
    for _ in 0..4 {
        let err = alpha - split.total();
        if err == 0.0 {
            break;
        }
        split.alpha0 += err;
    }
    split
}

/// Basic: thirds. Finite-sample: `alpha1 = alpha2 = alpha/(2 sqrt n)` and
/// `alpha0 = alpha - alpha/sqrt n`.
pub fn split_alpha_known(alpha: f64, n: u64, mode: SplitMode) -> Result<ConfidenceSplit> {
    check_alpha(alpha)?;
    check_n(n, 1, "a confidence split")?;
    let a = match mode {
        SplitMode::Basic => alpha / 3.0,
        SplitMode::FiniteSample => {
            if n <= 1 {
                return Err(Error::invalid("the finite-sample split needs n >= 2"));
            }
            alpha / (2.0 * (n as f64).sqrt())
        }
    };
    Ok(with_residue(alpha, a, a, 0.0))
}

/// Basic: `alpha3 = min(alpha/4, 1/log^2 n)` and equal thirds of the rest.
/// Finite-sample: `alpha1 = alpha2 = alpha3 = alpha/(3 sqrt n)`.
pub fn split_alpha_unknown(alpha: f64, n: u64, mode: SplitMode) -> Result<ConfidenceSplit> {
    check_alpha(alpha)?;
    check_n(n, 2, "the unknown-variance split")?;
    let (a, a3) = match mode {
        SplitMode::Basic => {
            let a3 = (alpha / 4.0).min(1.0 / (n as f64).ln().powi(2));
            ((alpha - a3) / 3.0, a3)
        }
        SplitMode::FiniteSample => {
            let a = alpha / (3.0 * (n as f64).sqrt());
            (a, a)
        }
    };
    Ok(with_residue(alpha, a, a, a3))
}

/// Does the known-variance interval get past its gate?
pub fn gate_known(n: u64, budget: &PrivacyBudget, split: &ConfidenceSplit, sigma: f64, big_r: f64) -> Result<bool> {
    let parts = split_budget(*budget, 2)?;
    Ok(range_known_gate(n, sigma, &parts.part(0), split.alpha2, big_r)?.passed)
}

/// Does the unknown-variance interval get past its gate?
pub fn gate_unknown(n: u64, budget: &PrivacyBudget, split: &ConfidenceSplit, bounds: &ParameterBounds) -> Result<bool> {
    let parts = split_budget(*budget, 3)?;
    Ok(range_unknown_gate(n, &parts.part(0), split.alpha3, bounds)?.passed)
}

/// Noise scale of the clamped mean: `w0 / (eps n)`.
pub fn mean_noise_scale(w0: f64, epsilon: f64, n: u64) -> f64 {
    w0 / (epsilon * n as f64)
}

/// Noise scale of the clamped variance: `w0^2 / (eps (n - 1))`.
pub fn variance_noise_scale(w0: f64, epsilon: f64, n: u64) -> f64 {
    w0 * w0 / (epsilon * (n - 1) as f64)
}

/// Mean of `s` clamped to `[lo, hi]`, plus `Lap(w0 / (eps n))`. `w0` is the
/// sensitivity width, normally `hi - lo`. Returns the noisy mean and the
/// Laplace draw.
pub fn noisy_clamped_mean<R: NoiseSource + ?Sized>(
    s: &Sample,
    lo: f64,
    hi: f64,
    w0: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let clamped = clamp_sample(s, lo, hi)?;
    let z = rng.laplace(mean_noise_scale(w0, epsilon, s.n() as u64))?;
    Ok((clamped.mean() + z, z))
}

fn half_width_known(n: u64, sigma: f64, split: &ConfidenceSplit, b1: f64) -> Result<f64> {
    let z = std_normal_quantile(1.0 - split.alpha0 / 2.0)?;
    Ok(sigma / (n as f64).sqrt() * z + b1 * (1.0 / split.alpha1).ln())
}

/// Width of a non-trivial known-variance interval,
/// `2 (sigma/sqrt n z_{1-alpha0/2} + b1 log(1/alpha1))`. It depends only on
/// the parameters, never on the data or the seed.
pub fn known_variance_width(n: u64, sigma: f64, budget: &PrivacyBudget, alpha: f64, mode: SplitMode) -> Result<f64> {
    let split = split_alpha_known(alpha, n, mode)?;
    let parts = split_budget(*budget, 2)?;
    let w0 = range_width(n, sigma, split.alpha2);
    let b1 = mean_noise_scale(w0, parts.part(1).epsilon, n);
    Ok(2.0 * half_width_known(n, sigma, &split, b1)?)
}

fn trivial_report(
    big_r: f64,
    gate_passed: bool,
    split: ConfidenceSplit,
    budget_split: BudgetSplit,
    mechanism_tag: MechanismTag,
    seed: u64,
) -> CiRun {
    let interval = IntervalEstimate::trivial(big_r);
    CiRun {
        report: CiReport {
            width: interval.width(),
            interval,
            gate_passed,
            split,
            budget_split,
            mechanism_tag,
            seed,
            sigma_hat: None,
            variance_fallback: false,
        },
        range: None,
        scale: None,
        moments: None,
    }
}

/// Private confidence interval for the mean when the standard deviation is
/// known, seeded from `req.seed`.
pub fn ci_known_variance(req: &KnownVarRequest) -> Result<CiReport> {
    Ok(ci_known_variance_run(req, &mut RngStream::new(req.seed, 0))?.report)
}

/// As [`ci_known_variance`] with an explicit noise source; also returns the
/// intermediate estimates.
pub fn ci_known_variance_run<R: NoiseSource + ?Sized>(req: &KnownVarRequest, rng: &mut R) -> Result<CiRun> {
    PrivacyBudget::new(req.budget.epsilon, req.budget.delta)?;
    if !(req.sigma.is_finite() && req.sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be finite and positive, got {}", req.sigma)));
    }
    check_range_bound(&req.budget, req.big_r)?;
    let n = req.sample.n() as u64;
    let split = split_alpha_known(req.alpha, n, req.split_mode)?;
    let budget_split = split_budget(req.budget, 2)?;
    let range_budget = budget_split.part(0);
    let mean_eps = budget_split.part(1).epsilon;

    let gate = range_known_gate(n, req.sigma, &range_budget, split.alpha2, req.big_r)?;
    let trivial = |split, budget_split| trivial_report(req.big_r, gate.passed, split, budget_split, gate.mechanism, req.seed);
    if !gate.passed && req.gate_policy == GatePolicy::Enforce {
        return Ok(trivial(split, budget_split));
    }
    let range = match range_known_sigma_with(
        &req.sample,
        req.sigma,
        &range_budget,
        split.alpha2,
        req.big_r,
        GatePolicy::Bypass,
        rng,
    ) {
        Ok(r) => r,
        Err(Error::EstimationFailed(_)) => return Ok(trivial(split, budget_split)),
        Err(e) => return Err(e),
    };

    let b1 = mean_noise_scale(range.width_w0, mean_eps, n);
    let (mu_tilde, z1) = noisy_clamped_mean(&req.sample, range.x_min, range.x_max, range.width_w0, mean_eps, rng)?;
    let w = half_width_known(n, req.sigma, &split, b1)?;
    Ok(CiRun {
        report: CiReport {
            interval: IntervalEstimate::centered(mu_tilde, w),
            width: 2.0 * w,
            gate_passed: gate.passed,
            split,
            budget_split,
            mechanism_tag: range.mechanism,
            seed: req.seed,
            sigma_hat: None,
            variance_fallback: false,
        },
        range: Some(range),
        scale: None,
        moments: Some(NoisyMoments { mu_tilde, z1, b1, s1_sq: None, z2: None, b2: None, s_tilde_sq: None }),
    })
}

/// Private confidence interval for the mean when the standard deviation is
/// unknown, seeded from `req.seed`.
pub fn ci_unknown_variance(req: &UnknownVarRequest) -> Result<CiReport> {
    Ok(ci_unknown_variance_run(req, &mut RngStream::new(req.seed, 0))?.report)
}

pub fn ci_unknown_variance_run<R: NoiseSource + ?Sized>(req: &UnknownVarRequest, rng: &mut R) -> Result<CiRun> {
    validate_inputs(&req.budget, &req.bounds, req.alpha)?;
    let n = req.sample.n() as u64;
    let split = split_alpha_unknown(req.alpha, n, req.split_mode)?;
    let budget_split = split_budget(req.budget, 3)?;
    let range_budget = budget_split.part(0);
    let mean_eps = budget_split.part(1).epsilon;
    let var_eps = budget_split.part(2).epsilon;
    let big_r = req.bounds.big_r;

    let gate = range_unknown_gate(n, &range_budget, split.alpha3, &req.bounds)?;
    let trivial = |split, budget_split| trivial_report(big_r, gate.passed, split, budget_split, gate.mechanism, req.seed);
    if !gate.passed && req.gate_policy == GatePolicy::Enforce {
        return Ok(trivial(split, budget_split));
    }
    let (scale, range) =
        match range_unknown_sigma_with(&req.sample, &range_budget, split.alpha3, &req.bounds, GatePolicy::Bypass, rng) {
            Ok(r) => r,
            Err(Error::EstimationFailed(_)) => return Ok(trivial(split, budget_split)),
            Err(e) => return Err(e),
        };

    let w0 = range.width_w0;
    let clamped = clamp_sample(&req.sample, range.x_min, range.x_max)?;
    let b1 = mean_noise_scale(w0, mean_eps, n);
    let z1 = rng.laplace(b1)?;
    let mu_tilde = (clamped.mean() + z1).clamp(range.x_min, range.x_max);

    let s1_sq = clamped.values().iter().map(|y| (y - mu_tilde).powi(2)).sum::<f64>() / (n - 1) as f64;
    let b2 = variance_noise_scale(w0, var_eps, n);
    let z2 = rng.laplace(b2)?;
    let mut s_tilde_sq = s1_sq + z2 + b2 * (1.0 / split.alpha2).ln();
    let sigma_max = req.bounds.sigma_max;
    let mut variance_fallback = false;
    if s_tilde_sq < 0.0 || s_tilde_sq > sigma_max * sigma_max {
        if sigma_max.is_finite() {
            s_tilde_sq = sigma_max * sigma_max;
        } else {
            // Every clamped point lies in a window of width w0.
            s_tilde_sq = w0 * w0;
            variance_fallback = true;
        }
    }

    let t = student_t_quantile(n - 1, 1.0 - split.alpha0 / 2.0)?;
    let w = s_tilde_sq.sqrt() / (n as f64).sqrt() * t + b1 * (1.0 / split.alpha1).ln();
    Ok(CiRun {
        report: CiReport {
            interval: IntervalEstimate::centered(mu_tilde, w),
            width: 2.0 * w,
            gate_passed: gate.passed,
            split,
            budget_split,
            mechanism_tag: range.mechanism,
            seed: req.seed,
            sigma_hat: Some(scale.sigma_hat),
            variance_fallback,
        },
        range: Some(range),
        scale: Some(scale),
        moments: Some(NoisyMoments {
            mu_tilde,
            z1,
            b1,
            s1_sq: Some(s1_sq),
            z2: Some(z2),
            b2: Some(b2),
            s_tilde_sq: Some(s_tilde_sq),
        }),
    })
}

/// `X̄ ± sigma/sqrt(n) z_{1-alpha/2}`.
pub fn nonprivate_ci_known(s: &Sample, sigma: f64, alpha: f64) -> Result<IntervalEstimate> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be finite and nonnegative, got {sigma}")));
    }
    check_unit(alpha)?;
    let z = std_normal_quantile(1.0 - alpha / 2.0)?;
    Ok(IntervalEstimate::centered(s.mean(), sigma / (s.n() as f64).sqrt() * z))
}

/// `X̄ ± s/sqrt(n) t_{n-1, 1-alpha/2}` with the unbiased sample variance `s^2`.
pub fn nonprivate_ci_unknown(s: &Sample, alpha: f64) -> Result<IntervalEstimate> {
    let n = s.n() as u64;
    check_n(n, 2, "the t interval")?;
    check_unit(alpha)?;
    let mean = s.mean();
    let var = s.values().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = student_t_quantile(n - 1, 1.0 - alpha / 2.0)?;
    Ok(IntervalEstimate::centered(mean, var.sqrt() / (n as f64).sqrt() * t))
}

fn check_unit(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}
