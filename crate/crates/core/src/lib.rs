//! Differentially private confidence intervals for the mean of Gaussian
//! data, with the histogram and range estimators they are built from, lower
//! bounds on achievable width, and a Monte Carlo harness.

pub mod bounds;
pub mod ci;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod histogram;
pub mod model;
pub mod range;

pub use bounds::{lower_bound_report, private_width_lower_bound, LowerBoundReport};
pub use ci::{ci_known_variance, ci_unknown_variance, KnownVarRequest, SplitMode, UnknownVarRequest};
pub use distributions::{NoiseSource, RngStream};
pub use error::{Error, Result};
pub use harness::{dp_noise_audit, load_csv, run_simulation, CoverageReport, Scenario, SimulationConfig};
pub use model::{
    BudgetSplit, CiReport, ConfidenceSplit, IntervalEstimate, MechanismTag, ParameterBounds, PrivacyBudget, Sample,
};
pub use range::{GatePolicy, RangeEstimate, SigmaEstimate};
