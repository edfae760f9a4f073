//! Monte Carlo certification of the statistical guarantees, a noise audit,
//! and CSV ingestion.

mod audit;
mod csv;
mod simulation;

pub use audit::{dp_noise_audit, AuditReport, RatioCheck, ScaleCheck};
pub use csv::{load_csv, parse_csv};
pub use simulation::{run_simulation, CoverageReport, HistogramModel, Scenario, SimulationConfig};
