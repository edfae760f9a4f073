//! Special functions and samplers used by the mechanisms and the harness.

mod normal;
mod rng;
mod special;
mod student_t;

pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf};
pub use rng::{sample_gaussian, sample_laplace, NoiseSource, RecordingSource, RngStream};
pub use special::{kn_constant, t_quantile_bound, z_quantile_bound};
pub use student_t::{student_t_cdf, student_t_pdf, student_t_quantile};
