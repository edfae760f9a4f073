//! A smoke test for the privacy plumbing. Privacy itself follows from the
//! noise scales; the audit checks that the scales actually used match the
//! sensitivity formulas and that released means on neighboring datasets are
//! statistically indistinguishable to within `e^eps`.

use serde::{Deserialize, Serialize};

use crate::ci::{ci_unknown_variance_run, noisy_clamped_mean, SplitMode, UnknownVarRequest};
use crate::distributions::{sample_gaussian, RecordingSource, RngStream};
use crate::error::{Error, Result};
use crate::histogram::{counts_of, laplace_histogram, BinningScheme};
use crate::model::{split_budget_halves, ParameterBounds, PrivacyBudget, Sample};
use crate::range::GatePolicy;

pub const MIN_AUDIT_TRIALS: u64 = 100_000;
const RATIO_BINS: usize = 50;
const MIN_BIN_COUNT: u64 = 1000;

/// Recorded Laplace scales of one mechanism against the expected value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCheck {
    pub name: String,
    pub expected: Vec<f64>,
    pub recorded: Vec<f64>,
    pub exact: bool,
}

impl ScaleCheck {
    fn new(name: &str, expected: Vec<f64>, recorded: Vec<f64>) -> Self {
        let exact = expected.len() == recorded.len()
            && expected.iter().zip(&recorded).all(|(e, r)| e.to_bits() == r.to_bits());
        Self { name: name.into(), expected, recorded, exact }
    }
}

/// Worst bin of a two-sample histogram comparison. A bin passes when
/// `max(c1/c2, c2/c1) <= e^eps (1 + 4 sqrt(1/c1 + 1/c2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub epsilon: f64,
    pub draws: u64,
    pub bins: usize,
    pub populated_bins: usize,
    pub max_ratio: f64,
    /// Largest ratio-to-allowance quotient; at most 1 on a pass.
    pub worst_excess: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub budget: PrivacyBudget,
    pub n: u64,
    pub w0: f64,
    pub scale_checks: Vec<ScaleCheck>,
    pub neighboring: RatioCheck,
    pub identical: RatioCheck,
    pub pass: bool,
}

fn mean_scale_check(budget: &PrivacyBudget, n: u64, w0: f64, seed: u64) -> Result<ScaleCheck> {
    let s = Sample::new(vec![0.0; n as usize])?;
    let mut rec = RecordingSource::new(RngStream::new(seed, 0));
    noisy_clamped_mean(&s, 0.0, w0, w0, budget.epsilon, &mut rec)?;
    Ok(ScaleCheck::new("mean", vec![w0 / (budget.epsilon * n as f64)], rec.scales().to_vec()))
}

fn histogram_scale_check(budget: &PrivacyBudget, n: u64, seed: u64) -> Result<ScaleCheck> {
    let s = Sample::new((0..n).map(|i| (i % 5) as f64 - 2.0).collect())?;
    let scheme = BinningScheme::fixed_width_symmetric(1.0, 2)?;
    let mut rec = RecordingSource::new(RngStream::new(seed, 1));
    let pure = PrivacyBudget::pure(budget.epsilon)?;
    laplace_histogram(&counts_of(s.values(), &scheme), &scheme, &pure, &mut rec)?;
    Ok(ScaleCheck::new("histogram", vec![2.0 / (budget.epsilon * n as f64); 5], rec.scales().to_vec()))
}

/// Runs the whole unknown-variance pipeline and checks every scale it draws
/// against the share of the budget it was allotted.
fn pipeline_scale_checks(budget: &PrivacyBudget, n: u64, seed: u64) -> Result<Vec<ScaleCheck>> {
    let mut data_rng = RngStream::new(seed, 2);
    let values = (0..n).map(|_| sample_gaussian(&mut data_rng, 0.0, 1.0)).collect::<Result<Vec<_>>>()?;
    let req = UnknownVarRequest {
        sample: Sample::new(values)?,
        budget: *budget,
        alpha: 0.05,
        bounds: ParameterBounds::new(10.0, 0.25, 4.0)?,
        split_mode: SplitMode::Basic,
        seed,
        gate_policy: GatePolicy::Bypass,
    };
    let mut rec = RecordingSource::new(RngStream::new(seed, 3));
    let run = ci_unknown_variance_run(&req, &mut rec)?;
    let range = run
        .range
        .ok_or_else(|| Error::EstimationFailed("audit pipeline returned the trivial interval".into()))?;
    let parts = &run.report.budget_split;
    let halves = split_budget_halves(parts.part(0))?;
    let recorded = rec.scales();
    let nf = n as f64;
    let pairs = (n / 2) as f64;

    // The scale histogram and the location histogram are dense, so the
    // number of draws is fixed by the bins; split the record at the first
    // scale that is not the pair-histogram one.
    let pair_scale = 2.0 / (halves.part(0).epsilon * pairs);
    let loc_scale = 2.0 / (halves.part(1).epsilon * nf);
    let k_pairs = recorded.iter().take_while(|s| s.to_bits() == pair_scale.to_bits()).count();
    let tail = &recorded[k_pairs..];
    let k_loc = tail.len().saturating_sub(2);
    let w0 = range.width_w0;
    let eps1 = parts.part(1).epsilon;
    let eps2 = parts.part(2).epsilon;
    Ok(vec![
        ScaleCheck::new("pipeline_scale_histogram", vec![pair_scale; k_pairs.max(1)], recorded[..k_pairs].to_vec()),
        ScaleCheck::new("pipeline_location_histogram", vec![loc_scale; k_loc.max(1)], tail[..k_loc].to_vec()),
        ScaleCheck::new(
            "pipeline_mean_and_variance",
            vec![w0 / (eps1 * nf), w0 * w0 / (eps2 * (nf - 1.0))],
            tail[k_loc..].to_vec(),
        ),
    ])
}

/// Noisy clamped-mean release: clamp to `[0, clamp_hi]`, noise calibrated
/// to sensitivity width `w0`. A correct release has `clamp_hi == w0`.
#[derive(Clone, Copy)]
struct MeanRelease {
    epsilon: f64,
    w0: f64,
    clamp_hi: f64,
}

impl MeanRelease {
    /// Histogram of `draws` releases over a window covering both datasets'
    /// means to six noise scales.
    fn histogram(&self, s: &Sample, draws: u64, rng: &mut RngStream) -> Result<Vec<u64>> {
        let n = s.n() as f64;
        let scale = self.w0 / (self.epsilon * n);
        let lo = -6.0 * scale;
        let hi = self.clamp_hi / n + 6.0 * scale;
        let bin_width = (hi - lo) / RATIO_BINS as f64;
        let mut counts = vec![0u64; RATIO_BINS];
        for _ in 0..draws {
            let (m, _) = noisy_clamped_mean(s, 0.0, self.clamp_hi, self.w0, self.epsilon, rng)?;
            let j = ((m - lo) / bin_width).floor();
            if j >= 0.0 && j < RATIO_BINS as f64 {
                counts[j as usize] += 1;
            }
        }
        Ok(counts)
    }
}

fn ratio_check(
    release: MeanRelease,
    a: &Sample,
    b: &Sample,
    ratio_epsilon: f64,
    draws: u64,
    rng: &RngStream,
) -> Result<RatioCheck> {
    let c1 = release.histogram(a, draws, &mut rng.substream(0))?;
    let c2 = release.histogram(b, draws, &mut rng.substream(1))?;
    let bound = ratio_epsilon.exp();
    let mut populated = 0;
    let mut max_ratio: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for (&x, &y) in c1.iter().zip(&c2) {
        if x < MIN_BIN_COUNT || y < MIN_BIN_COUNT {
            continue;
        }
        populated += 1;
        let (x, y) = (x as f64, y as f64);
        let ratio = (x / y).max(y / x);
        let allowed = bound * (1.0 + 4.0 * (1.0 / x + 1.0 / y).sqrt());
        max_ratio = max_ratio.max(ratio);
        worst = worst.max(ratio / allowed);
    }
    Ok(RatioCheck {
        epsilon: ratio_epsilon,
        draws,
        bins: RATIO_BINS,
        populated_bins: populated,
        max_ratio,
        worst_excess: worst,
        pass: populated > 0 && worst <= 1.0,
    })
}

fn neighbors(n: u64, outlier: f64) -> Result<(Sample, Sample)> {
    let zeros = vec![0.0; n as usize];
    let mut other = zeros.clone();
    other[0] = outlier;
    Ok((Sample::new(zeros)?, Sample::new(other)?))
}

/// Exact noise-scale checks followed by the neighboring-dataset ratio test
/// with `trials` draws per dataset. The neighbors are `n` zeros and `n - 1`
/// zeros plus one far outlier, which clamping to `[0, w0]` must pull in to
/// `w0`.
pub fn dp_noise_audit(budget: PrivacyBudget, n: u64, w0: f64, trials: u64, base_seed: u64) -> Result<AuditReport> {
    PrivacyBudget::new(budget.epsilon, budget.delta)?;
    if trials < MIN_AUDIT_TRIALS {
        return Err(Error::invalid(format!("audit needs at least {MIN_AUDIT_TRIALS} trials, got {trials}")));
    }
    if n < 2 {
        return Err(Error::invalid("audit needs n >= 2"));
    }
    if !(w0.is_finite() && w0 > 0.0) {
        return Err(Error::invalid(format!("w0 must be finite and positive, got {w0}")));
    }

    let mut scale_checks = vec![
        mean_scale_check(&budget, n, w0, base_seed)?,
        histogram_scale_check(&budget, n, base_seed)?,
    ];
    scale_checks.extend(pipeline_scale_checks(&budget, n, base_seed)?);

    let (zeros, outlier) = neighbors(n, 1e6 * w0)?;
    let release = MeanRelease { epsilon: budget.epsilon, w0, clamp_hi: w0 };
    let neighboring = ratio_check(release, &zeros, &outlier, budget.epsilon, trials, &RngStream::new(base_seed, 10))?;
    let identical = ratio_check(release, &zeros, &zeros, 0.0, trials, &RngStream::new(base_seed, 20))?;

    let pass = scale_checks.iter().all(|c| c.exact) && neighboring.pass && identical.pass;
    Ok(AuditReport { budget, n, w0, scale_checks, neighboring, identical, pass })
}
