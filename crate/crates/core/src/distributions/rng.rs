//! Seeded random streams and the two samplers the mechanisms and the
//! simulation harness draw from.
//!
//! Every algorithm takes its randomness as an explicit `&mut impl
//! NoiseSource`; nothing in the crate seeds implicitly.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Source of uniform and Gaussian variates. Laplace draws go through
/// [`NoiseSource::laplace`] so that wrappers such as [`RecordingSource`] can
/// observe every noise scale a mechanism uses.
pub trait NoiseSource {
    /// Uniform variate in the open interval `(0, 1)`.
    fn uniform_open(&mut self) -> f64;

    fn standard_normal(&mut self) -> f64;

    fn laplace(&mut self, scale: f64) -> Result<f64> {
        laplace_from_uniform(self.uniform_open(), scale)
    }
}

impl<T: NoiseSource + ?Sized> NoiseSource for &mut T {
    fn uniform_open(&mut self) -> f64 {
        (**self).uniform_open()
    }

    fn standard_normal(&mut self) -> f64 {
        (**self).standard_normal()
    }

    fn laplace(&mut self, scale: f64) -> Result<f64> {
        (**self).laplace(scale)
    }
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha12 with the stream id mapped onto ChaCha's 64-bit stream
/// selector, so distinct ids give non-overlapping keystreams under the same
/// seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// An independent stream derived from this one's seed.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }
}

impl NoiseSource for RngStream {
    fn uniform_open(&mut self) -> f64 {
        // 53 random mantissa bits, offset by half an ulp so 0 is excluded.
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }
}

fn laplace_from_uniform(u: f64, scale: f64) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("Laplace scale must be positive, got {scale}")));
    }
    let v = u - 0.5;
    // Inverse CDF; |v| < 1/2 so the log argument stays positive.
    Ok(-scale * v.signum() * (-2.0 * v.abs()).ln_1p())
}

/// Mean-zero Laplace draw with the given scale, by inversion of one uniform.
pub fn sample_laplace<R: NoiseSource + ?Sized>(rng: &mut R, scale: f64) -> Result<f64> {
    rng.laplace(scale)
}

/// `N(mu, sigma^2)` draw.
pub fn sample_gaussian<R: NoiseSource + ?Sized>(rng: &mut R, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(mu + sigma * rng.standard_normal())
}

/// Wraps a source and records the scale of every Laplace draw, in order.
#[derive(Debug, Clone)]
pub struct RecordingSource<R> {
    inner: R,
    scales: Vec<f64>,
}

impl<R: NoiseSource> RecordingSource<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, scales: Vec::new() }
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn clear(&mut self) {
        self.scales.clear();
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

impl<R: NoiseSource> NoiseSource for RecordingSource<R> {
    fn uniform_open(&mut self) -> f64 {
        self.inner.uniform_open()
    }

    fn standard_normal(&mut self) -> f64 {
        self.inner.standard_normal()
    }

    fn laplace(&mut self, scale: f64) -> Result<f64> {
        self.scales.push(scale);
        self.inner.laplace(scale)
    }
}
