use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{private_width_lower_bound, width_floor_applies};
use crate::ci::{ci_known_variance_run, ci_unknown_variance_run, KnownVarRequest, SplitMode, UnknownVarRequest};
use crate::distributions::{sample_gaussian, NoiseSource, RngStream};
use crate::error::{Error, Result};
use crate::histogram::{counts_of, private_histogram, BinningScheme};
use crate::model::{check_alpha, check_range_bound, ext_real, validate_inputs, ParameterBounds, PrivacyBudget, Sample};
use crate::range::{range_known_sigma_with, sigma_estimate_with, GatePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Known-variance interval contains `mu`.
    CoverageKnown,
    /// Unknown-variance interval contains `mu`.
    CoverageUnknown,
    /// Every data point lies inside the private range.
    RangeContainment,
    /// `sigma <= sigma_hat <= 8 sigma`.
    SigmaBracket,
    /// Known-variance interval is at least as wide as the private width floor.
    WidthProfile,
    /// Every released bin probability is within `beta` of the truth.
    HistogramAccuracy,
}

/// A discrete distribution on the integers `0..probabilities.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramModel {
    pub probabilities: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scenario: Scenario,
    pub mu: f64,
    pub sigma: f64,
    pub budget: PrivacyBudget,
    pub alpha: f64,
    /// `big_r` doubles as the known-variance range bound.
    pub bounds: ParameterBounds,
    #[serde(default)]
    pub split_mode: SplitMode,
    pub n: u64,
    pub trials: u64,
    pub base_seed: u64,
    #[serde(default)]
    pub gate_policy: GatePolicy,
    /// Required for [`Scenario::HistogramAccuracy`], ignored otherwise.
    #[serde(default)]
    pub histogram: Option<HistogramModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: Scenario,
    pub trials: u64,
    pub successes: u64,
    pub empirical_rate: f64,
    pub target: f64,
    pub binomial_sigma: f64,
    /// Mean of the per-trial widths (interval width, range width, `sigma_hat`,
    /// or max histogram error, by scenario) over trials that completed.
    #[serde(with = "ext_real")]
    pub mean_width: f64,
    #[serde(with = "ext_real")]
    pub width_stddev: f64,
    /// Private width floor, for interval scenarios in the regime where it
    /// applies.
    pub lower_bound_floor: Option<f64>,
    pub pass: bool,
    /// Trials that returned the trivial interval.
    pub trivial_trials: u64,
    /// Trials whose algorithm returned an error.
    pub failed_trials: u64,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    success: bool,
    width: f64,
    trivial: bool,
}

/// Compensated (Neumaier) running sum.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn validate(cfg: &SimulationConfig) -> Result<()> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if cfg.n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    check_alpha(cfg.alpha)?;
    PrivacyBudget::new(cfg.budget.epsilon, cfg.budget.delta)?;
    if cfg.scenario == Scenario::HistogramAccuracy {
        let model = cfg
            .histogram
            .as_ref()
            .ok_or_else(|| Error::invalid("histogram_accuracy needs a histogram model"))?;
        if model.probabilities.is_empty() || model.probabilities.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
            return Err(Error::invalid("histogram probabilities must lie in [0, 1]"));
        }
        let total: f64 = model.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("histogram probabilities sum to {total}, not 1")));
        }
        if !(model.beta > 0.0 && model.beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1), got {}", model.beta)));
        }
        return Ok(());
    }
    match cfg.scenario {
        Scenario::CoverageUnknown | Scenario::SigmaBracket => validate_inputs(&cfg.budget, &cfg.bounds, cfg.alpha)?,
        _ => check_range_bound(&cfg.budget, cfg.bounds.big_r)?,
    }
    if !(cfg.sigma.is_finite() && cfg.sigma > 0.0) {
        return Err(Error::invalid(format!("model sigma must be finite and positive, got {}", cfg.sigma)));
    }
    if !(cfg.mu.is_finite() && cfg.mu.abs() < cfg.bounds.big_r) {
        return Err(Error::invalid(format!("model mu = {} must lie in (-R, R)", cfg.mu)));
    }
    Ok(())
}

fn gaussian_sample(cfg: &SimulationConfig, rng: &mut RngStream) -> Result<Sample> {
    let values = (0..cfg.n).map(|_| sample_gaussian(rng, cfg.mu, cfg.sigma)).collect::<Result<Vec<_>>>()?;
    Sample::new(values)
}

fn categorical_sample(probs: &[f64], n: u64, rng: &mut RngStream) -> Result<Sample> {
    let values = (0..n)
        .map(|_| {
            let u = rng.uniform_open();
            let mut acc = 0.0;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k as f64;
                }
            }
            // u landed in the rounding gap above the last partial sum
            (probs.len() - 1) as f64
        })
        .collect();
    Sample::new(values)
}

fn known_request(cfg: &SimulationConfig, sample: Sample) -> KnownVarRequest {
    KnownVarRequest {
        sample,
        sigma: cfg.sigma,
        budget: cfg.budget,
        alpha: cfg.alpha,
        big_r: cfg.bounds.big_r,
        split_mode: cfg.split_mode,
        seed: cfg.base_seed,
        gate_policy: cfg.gate_policy,
    }
}

fn run_trial(cfg: &SimulationConfig, floor: Option<f64>, trial: u64) -> Result<Outcome> {
    let mut data_rng = RngStream::new(cfg.base_seed, 2 * trial);
    let mut rng = RngStream::new(cfg.base_seed, 2 * trial + 1);
    if let Some(model) = &cfg.histogram {
        if cfg.scenario == Scenario::HistogramAccuracy {
            let sample = categorical_sample(&model.probabilities, cfg.n, &mut data_rng)?;
            let k = model.probabilities.len() as i64;
            let scheme = BinningScheme::fixed_width(1.0, Some((0, k - 1)))?;
            let hist = private_histogram(&counts_of(sample.values(), &scheme), &scheme, &cfg.budget, &mut rng)?;
            let err = model
                .probabilities
                .iter()
                .enumerate()
                .map(|(j, p)| (hist.entries.get(&(j as i64)).copied().unwrap_or(0.0) - p).abs())
                .fold(0.0, f64::max);
            return Ok(Outcome { success: err <= model.beta, width: err, trivial: false });
        }
    }
    let sample = gaussian_sample(cfg, &mut data_rng)?;
    let outcome = match cfg.scenario {
        Scenario::CoverageKnown | Scenario::WidthProfile => {
            let run = ci_known_variance_run(&known_request(cfg, sample), &mut rng)?;
            let width = run.report.width;
            let success = if cfg.scenario == Scenario::CoverageKnown {
                run.report.interval.contains(cfg.mu)
            } else {
                floor.is_none_or(|f| width >= f)
            };
            Outcome { success, width, trivial: run.report.interval.trivial }
        }
        Scenario::CoverageUnknown => {
            let req = UnknownVarRequest {
                sample,
                budget: cfg.budget,
                alpha: cfg.alpha,
                bounds: cfg.bounds,
                split_mode: cfg.split_mode,
                seed: cfg.base_seed,
                gate_policy: cfg.gate_policy,
            };
            let run = ci_unknown_variance_run(&req, &mut rng)?;
            Outcome {
                success: run.report.interval.contains(cfg.mu),
                width: run.report.width,
                trivial: run.report.interval.trivial,
            }
        }
        Scenario::RangeContainment => {
            let r = range_known_sigma_with(
                &sample,
                cfg.sigma,
                &cfg.budget,
                cfg.alpha,
                cfg.bounds.big_r,
                cfg.gate_policy,
                &mut rng,
            )?;
            let inside = sample.values().iter().all(|x| (r.x_min..=r.x_max).contains(x));
            Outcome { success: inside, width: r.x_max - r.x_min, trivial: false }
        }
        Scenario::SigmaBracket => {
            let e = sigma_estimate_with(
                &sample,
                &cfg.budget,
                cfg.alpha,
                cfg.bounds.sigma_min,
                cfg.bounds.sigma_max,
                cfg.gate_policy,
                &mut rng,
            )?;
            let ok = cfg.sigma <= e.sigma_hat && e.sigma_hat <= 8.0 * cfg.sigma;
            Outcome { success: ok, width: e.sigma_hat, trivial: false }
        }
        Scenario::HistogramAccuracy => unreachable!("validated above"),
    };
    Ok(outcome)
}

fn width_floor(cfg: &SimulationConfig) -> Result<Option<f64>> {
    let interval = matches!(cfg.scenario, Scenario::CoverageKnown | Scenario::CoverageUnknown | Scenario::WidthProfile);
    if !interval || !width_floor_applies(cfg.budget.delta, cfg.n, cfg.alpha) {
        return Ok(None);
    }
    let f = private_width_lower_bound(cfg.sigma, cfg.budget.epsilon, cfg.n, cfg.alpha, cfg.bounds.big_r)?;
    Ok(Some(f.width_floor))
}

/// Run `cfg.trials` independent replications of the scenario and aggregate
/// them. Trial `i` draws its data from stream `2i` and its noise from stream
/// `2i + 1` of `base_seed`, so the report does not depend on how trials are
/// scheduled across threads. Invalid configurations are rejected; any other
/// per-trial error counts as a failure.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<CoverageReport> {
    validate(cfg)?;
    let floor = width_floor(cfg)?;
    let outcomes: Vec<Result<Outcome>> = (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, floor, i)).collect();

    let mut successes = 0u64;
    let mut trivial_trials = 0u64;
    let mut failed_trials = 0u64;
    let mut widths = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        match outcome {
            Ok(Outcome { success, width, trivial }) => {
                successes += u64::from(success);
                trivial_trials += u64::from(trivial);
                widths.push(width);
            }
            Err(e) if e.is_validation() => return Err(e),
            Err(_) => failed_trials += 1,
        }
    }

    let (mean_width, width_stddev) = width_moments(&widths);
    let trials = cfg.trials as f64;
    let target = 1.0 - cfg.alpha;
    let binomial_sigma = (target * (1.0 - target) / trials).sqrt();
    let empirical_rate = successes as f64 / trials;
    Ok(CoverageReport {
        scenario: cfg.scenario,
        trials: cfg.trials,
        successes,
        empirical_rate,
        target,
        binomial_sigma,
        mean_width,
        width_stddev,
        lower_bound_floor: floor,
        pass: empirical_rate >= target - 3.0 * binomial_sigma,
        trivial_trials,
        failed_trials,
    })
}

fn width_moments(widths: &[f64]) -> (f64, f64) {
    if widths.is_empty() {
        return (0.0, 0.0);
    }
    if widths.iter().any(|w| w.is_infinite()) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let m = widths.len() as f64;
    let mut sum = Neumaier::default();
    widths.iter().for_each(|&w| sum.add(w));
    let mean = sum.total() / m;
    if widths.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq = Neumaier::default();
    widths.iter().for_each(|&w| sq.add((w - mean) * (w - mean)));
    (mean, (sq.total() / (m - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(scenario: Scenario, n: u64, trials: u64) -> SimulationConfig {
        SimulationConfig {
            scenario,
            mu: 0.5,
            sigma: 1.0,
            budget: PrivacyBudget::new(1.0, 0.0).unwrap(),
            alpha: 0.05,
            bounds: ParameterBounds::new(10.0, 0.1, 10.0).unwrap(),
            split_mode: SplitMode::Basic,
            n,
            trials,
            base_seed: 7,
            gate_policy: GatePolicy::Enforce,
            histogram: None,
        }
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut s = Neumaier::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.total(), 2.0);
    }

    #[test]
    fn trivial_regime_covers_exactly() {
        let r = run_simulation(&config(Scenario::CoverageKnown, 20, 50)).unwrap();
        assert_eq!(r.empirical_rate, 1.0);
        assert_eq!(r.trivial_trials, 50);
        assert_eq!(r.mean_width, 20.0);
        assert_eq!(r.width_stddev, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let cfg = config(Scenario::CoverageKnown, 5000, 40);
        let a = serde_json::to_string(&run_simulation(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_simulation(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| serde_json::to_string(&run_simulation(&cfg).unwrap()).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn rate_and_pass_are_consistent() {
        let r = run_simulation(&config(Scenario::CoverageKnown, 5000, 200)).unwrap();
        assert_eq!(r.empirical_rate, r.successes as f64 / 200.0);
        assert_eq!(r.pass, r.empirical_rate >= r.target - 3.0 * r.binomial_sigma);
        assert_eq!(r.trivial_trials, 0);
        // fixed width: no spread
        assert!(r.width_stddev <= 1e-12 * r.mean_width);
    }

    #[test]
    fn failing_trials_do_not_abort() {
        // Below the gate, Enforce makes the range estimator error in every trial.
        let r = run_simulation(&config(Scenario::RangeContainment, 20, 10)).unwrap();
        assert_eq!(r.failed_trials, 10);
        assert_eq!(r.successes, 0);
        assert!(!r.pass);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(run_simulation(&config(Scenario::CoverageKnown, 100, 0)).is_err());
        let far = SimulationConfig { mu: 10.0, ..config(Scenario::CoverageKnown, 100, 1) };
        assert!(matches!(run_simulation(&far), Err(Error::InvalidArgument(_))));
        let neg = SimulationConfig { sigma: -1.0, ..config(Scenario::CoverageKnown, 100, 1) };
        assert!(run_simulation(&neg).is_err());
        assert!(run_simulation(&config(Scenario::HistogramAccuracy, 100, 1)).is_err());
        let bad_probs = SimulationConfig {
            histogram: Some(HistogramModel { probabilities: vec![0.5, 0.4], beta: 0.1 }),
            ..config(Scenario::HistogramAccuracy, 100, 1)
        };
        assert!(run_simulation(&bad_probs).is_err());
    }

    #[test]
    fn small_scenarios_run() {
        // the scale gate needs far more pairs than this
        let r = run_simulation(&config(Scenario::SigmaBracket, 20_000, 20)).unwrap();
        assert_eq!(r.failed_trials, 20);
        let bypass = SimulationConfig { gate_policy: GatePolicy::Bypass, ..config(Scenario::SigmaBracket, 20_000, 20) };
        let r = run_simulation(&bypass).unwrap();
        assert_eq!(r.failed_trials, 0);
        assert!(r.successes >= 18);
        let r = run_simulation(&config(Scenario::WidthProfile, 5000, 5)).unwrap();
        assert!(r.lower_bound_floor.is_some());
        assert_eq!(r.successes, 5);
        let h = SimulationConfig {
            histogram: Some(HistogramModel { probabilities: vec![0.25; 4], beta: 0.05 }),
            ..config(Scenario::HistogramAccuracy, 2000, 20)
        };
        let r = run_simulation(&h).unwrap();
        assert_eq!(r.failed_trials, 0);
        assert!(r.mean_width < 0.05);
    }
}
