use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dpnormci_core::bounds::lower_bound_report;
use dpnormci_core::ci::{ci_known_variance, ci_unknown_variance, KnownVarRequest, SplitMode, UnknownVarRequest};
use dpnormci_core::harness::{dp_noise_audit, load_csv, parse_csv, run_simulation, HistogramModel, Scenario, SimulationConfig};
use dpnormci_core::range::{
    range_known_gate, range_known_sigma, range_unknown_gate, range_unknown_sigma, sigma_estimate, sigma_gate,
    GateCheck, GatePolicy, RangeEstimate, SigmaEstimate,
};
use dpnormci_core::{Error, ParameterBounds, PrivacyBudget, RngStream, Sample};

#[derive(Parser)]
#[command(name = "dpnormci", version, about = "Differentially private confidence intervals for Gaussian means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interval for the mean with known standard deviation.
    #[command(allow_negative_numbers = true)]
    CiKnown {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_parser = ext_real, default_value = "inf")]
        range_r: f64,
        #[arg(long, value_enum, default_value_t = Split::Basic)]
        split: Split,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Interval for the mean with unknown standard deviation.
    #[command(allow_negative_numbers = true)]
    CiUnknown {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long, value_enum, default_value_t = Split::Basic)]
        split: Split,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Private range of the data with known standard deviation.
    #[command(allow_negative_numbers = true)]
    RangeKnown {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_parser = ext_real, default_value = "inf")]
        range_r: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Private scale estimate followed by the private range.
    #[command(allow_negative_numbers = true)]
    RangeUnknown {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Private estimate of the standard deviation, within a factor of 8.
    #[command(allow_negative_numbers = true)]
    EstimateSigma {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[arg(long, default_value_t = 0.0)]
        sigma_min: f64,
        #[arg(long, value_parser = ext_real, default_value = "inf")]
        sigma_max: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Monte Carlo check of a statistical guarantee.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long, value_enum, default_value_t = Split::Basic)]
        split: Split,
        #[arg(long, env = "DPNORMCI_SEED", default_value_t = 0)]
        seed: u64,
        /// Run the estimators even below their sample-size gate.
        #[arg(long)]
        bypass_gate: bool,
        /// Bin probabilities for the histogram-accuracy scenario.
        #[arg(long, value_delimiter = ',')]
        probs: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
    },
    /// Lower bounds on private interval width and sample size.
    #[command(allow_negative_numbers = true)]
    LowerBound {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_parser = ext_real, default_value = "inf")]
        range_r: f64,
    },
    /// Check recorded noise scales and a neighboring-dataset ratio test.
    #[command(allow_negative_numbers = true)]
    DpAudit {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 100)]
        n: u64,
        #[arg(long, default_value_t = 8.0)]
        w0: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, env = "DPNORMCI_SEED", default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct DataArgs {
    /// One-column CSV file, or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    /// Skip the first line of the input.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct PrivacyArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_parser = ext_real, default_value = "inf")]
    range_r: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma_min: f64,
    #[arg(long, value_parser = ext_real, default_value = "inf")]
    sigma_max: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "DPNORMCI_SEED", default_value_t = 0)]
    seed: u64,
    /// Exit with status 3 instead of releasing a trivial result when the
    /// sample is too small for the guarantee.
    #[arg(long)]
    strict_gate: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Basic,
    FiniteSample,
}

impl From<Split> for SplitMode {
    fn from(s: Split) -> Self {
        match s {
            Split::Basic => SplitMode::Basic,
            Split::FiniteSample => SplitMode::FiniteSample,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    CoverageKnown,
    CoverageUnknown,
    RangeContainment,
    SigmaBracket,
    WidthProfile,
    HistogramAccuracy,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::CoverageKnown => Scenario::CoverageKnown,
            ScenarioArg::CoverageUnknown => Scenario::CoverageUnknown,
            ScenarioArg::RangeContainment => Scenario::RangeContainment,
            ScenarioArg::SigmaBracket => Scenario::SigmaBracket,
            ScenarioArg::WidthProfile => Scenario::WidthProfile,
            ScenarioArg::HistogramAccuracy => Scenario::HistogramAccuracy,
        }
    }
}

fn ext_real(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        other => {
            let v: f64 = other.parse().map_err(|_| format!("expected a number or `inf`, got {other:?}"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("expected a finite number or `inf`, got {other:?}"))
            }
        }
    }
}

enum Failure {
    Core(Error),
    GateNotMet,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult = Result<String, Failure>;

fn json<T: Serialize>(v: &T) -> CliResult {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Core(Error::InvalidArgument(e.to_string())))
}

fn read_sample(d: &DataArgs) -> Result<Sample, Error> {
    if d.input.as_os_str() == "-" {
        parse_csv(std::io::stdin().lock(), d.header)
    } else {
        load_csv(&d.input, d.header)
    }
}

fn budget(p: &PrivacyArgs) -> Result<PrivacyBudget, Error> {
    PrivacyBudget::new(p.epsilon, p.delta)
}

fn bounds(b: &BoundsArgs) -> Result<ParameterBounds, Error> {
    ParameterBounds::new(b.range_r, b.sigma_min, b.sigma_max)
}

fn strict_check(strict: bool, passed: bool) -> Result<(), Failure> {
    if strict && !passed {
        Err(Failure::GateNotMet)
    } else {
        Ok(())
    }
}

/// Runs a gated estimator; below the gate the estimate is `null` unless
/// `--strict-gate` turns that into a failure.
fn gated<T>(gate: &GateCheck, strict: bool, f: impl FnOnce() -> Result<T, Error>) -> Result<Option<T>, Failure> {
    strict_check(strict, gate.passed)?;
    if gate.passed {
        Ok(Some(f()?))
    } else {
        Ok(None)
    }
}

#[derive(Serialize)]
struct RangeOutput {
    gate: GateCheck,
    range: Option<RangeEstimate>,
}

#[derive(Serialize)]
struct SigmaOutput {
    gate: GateCheck,
    sigma: Option<SigmaEstimate>,
}

#[derive(Serialize)]
struct RangeUnknownOutput {
    gate: GateCheck,
    sigma: Option<SigmaEstimate>,
    range: Option<RangeEstimate>,
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::CiKnown { data, privacy, sigma, range_r, split, run } => {
            let req = KnownVarRequest {
                sample: read_sample(&data)?,
                sigma,
                budget: budget(&privacy)?,
                alpha: privacy.alpha,
                big_r: range_r,
                split_mode: split.into(),
                seed: run.seed,
                gate_policy: GatePolicy::Enforce,
            };
            let report = ci_known_variance(&req)?;
            strict_check(run.strict_gate, report.gate_passed)?;
            json(&report)
        }
        Command::CiUnknown { data, privacy, bounds: b, split, run } => {
            let req = UnknownVarRequest {
                sample: read_sample(&data)?,
                budget: budget(&privacy)?,
                alpha: privacy.alpha,
                bounds: bounds(&b)?,
                split_mode: split.into(),
                seed: run.seed,
                gate_policy: GatePolicy::Enforce,
            };
            let report = ci_unknown_variance(&req)?;
            strict_check(run.strict_gate, report.gate_passed)?;
            json(&report)
        }
        Command::RangeKnown { data, privacy, sigma, range_r, run } => {
            let s = read_sample(&data)?;
            let bud = budget(&privacy)?;
            let gate = range_known_gate(s.n() as u64, sigma, &bud, privacy.alpha, range_r)?;
            let range = gated(&gate, run.strict_gate, || {
                range_known_sigma(&s, sigma, &bud, privacy.alpha, range_r, &mut RngStream::new(run.seed, 0))
            })?;
            json(&RangeOutput { gate, range })
        }
        Command::RangeUnknown { data, privacy, bounds: b, run } => {
            let s = read_sample(&data)?;
            let bud = budget(&privacy)?;
            let bnd = bounds(&b)?;
            let gate = range_unknown_gate(s.n() as u64, &bud, privacy.alpha, &bnd)?;
            let est = gated(&gate, run.strict_gate, || {
                range_unknown_sigma(&s, &bud, privacy.alpha, &bnd, &mut RngStream::new(run.seed, 0))
            })?;
            let (sigma, range) = est.map_or((None, None), |(s, r)| (Some(s), Some(r)));
            json(&RangeUnknownOutput { gate, sigma, range })
        }
        Command::EstimateSigma { data, privacy, sigma_min, sigma_max, run } => {
            let s = read_sample(&data)?;
            let bud = budget(&privacy)?;
            let gate = sigma_gate(s.n() as u64, &bud, privacy.alpha, sigma_min, sigma_max)?;
            let sigma = gated(&gate, run.strict_gate, || {
                sigma_estimate(&s, &bud, privacy.alpha, sigma_min, sigma_max, &mut RngStream::new(run.seed, 0))
            })?;
            json(&SigmaOutput { gate, sigma })
        }
        Command::Simulate {
            scenario,
            mu,
            sigma,
            n,
            trials,
            privacy,
            bounds: b,
            split,
            seed,
            bypass_gate,
            probs,
            beta,
        } => {
            let cfg = SimulationConfig {
                scenario: scenario.into(),
                mu,
                sigma,
                budget: budget(&privacy)?,
                alpha: privacy.alpha,
                bounds: bounds(&b)?,
                split_mode: split.into(),
                n,
                trials,
                base_seed: seed,
                gate_policy: if bypass_gate { GatePolicy::Bypass } else { GatePolicy::Enforce },
                histogram: probs.map(|probabilities| HistogramModel { probabilities, beta }),
            };
            json(&run_simulation(&cfg)?)
        }
        Command::LowerBound { sigma, epsilon, delta, n, alpha, range_r } => {
            json(&lower_bound_report(sigma, epsilon, delta, n, alpha, range_r)?)
        }
        Command::DpAudit { epsilon, delta, n, w0, trials, seed } => {
            json(&dp_noise_audit(PrivacyBudget::new(epsilon, delta)?, n, w0, trials, seed)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // help and version exit 0, usage errors 2
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::GateNotMet) => {
            eprintln!("error: sample-size gate not met");
            ExitCode::from(3)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::GateNotMet { .. } => ExitCode::from(3),
                Error::Io(_) => ExitCode::from(2),
                e if e.is_validation() => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
