//! Differentially private histogram learners over fixed-width or dyadic bin
//! families.
//!
//! Two mechanisms are provided: a Laplace histogram that noises every bin of
//! a finite family (pure DP), and a stability-based histogram that only
//! noises occupied bins and suppresses those below a threshold (approximate
//! DP, works for countably many bins). [`select_mechanism`] picks between
//! them the same way [`required_n`] picks the smaller of its two sample-size
//! terms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::NoiseSource;
use crate::error::{Error, Result};
use crate::model::{MechanismTag, PrivacyBudget, Sample};

/// Largest number of bins the Laplace histogram will materialize.
pub const MAX_DENSE_BINS: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BinKind {
    /// `B_j = ((j - 1/2) w, (j + 1/2) w]`
    FixedWidth { width: f64 },
    /// `B_j = (2^j, 2^(j+1)]`
    Dyadic,
}

/// A bin family, optionally restricted to the indices `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    pub kind: BinKind,
    pub range: Option<(i64, i64)>,
}

impl BinningScheme {
    pub fn fixed_width(width: f64, range: Option<(i64, i64)>) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::invalid(format!("bin width must be positive, got {width}")));
        }
        Self::checked(BinKind::FixedWidth { width }, range)
    }

    /// Fixed-width bins with indices `-r..=r`.
    pub fn fixed_width_symmetric(width: f64, r: i64) -> Result<Self> {
        if r < 0 {
            return Err(Error::invalid(format!("bin radius must be nonnegative, got {r}")));
        }
        Self::fixed_width(width, Some((-r, r)))
    }

    pub fn dyadic(range: Option<(i64, i64)>) -> Result<Self> {
        Self::checked(BinKind::Dyadic, range)
    }

    fn checked(kind: BinKind, range: Option<(i64, i64)>) -> Result<Self> {
        if let Some((lo, hi)) = range {
            if lo > hi {
                return Err(Error::invalid(format!("empty bin range [{lo}, {hi}]")));
            }
        }
        Ok(Self { kind, range })
    }

    /// Number of bins, `None` for an unbounded family.
    pub fn bin_count(&self) -> Option<u64> {
        self.range.map(|(lo, hi)| (hi as i128 - lo as i128 + 1) as u64)
    }

    /// The bin count as an extended real, `inf` for an unbounded family.
    pub fn bin_count_ext(&self) -> f64 {
        self.bin_count().map_or(f64::INFINITY, |k| k as f64)
    }

    /// Index of the bin containing `x`, ignoring any range restriction.
    /// `Ok(None)` means `x` lies in no bin of the family (dyadic and `x <= 0`).
    pub fn raw_index(&self, x: f64) -> Result<Option<i64>> {
        match self.kind {
            BinKind::FixedWidth { width } => fixed_bin_index(x, width).map(Some),
            BinKind::Dyadic => Ok(dyadic_bin_index(x)),
        }
    }

    fn in_range(&self, j: i64) -> bool {
        self.range.is_none_or(|(lo, hi)| lo <= j && j <= hi)
    }
}

/// The `j` with `x ∈ ((j - 1/2) sigma, (j + 1/2) sigma]`; ties at bin
/// boundaries round down.
pub fn fixed_bin_index(x: f64, sigma: f64) -> Result<i64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("bin width must be positive, got {sigma}")));
    }
    if !x.is_finite() {
        return Err(Error::invalid(format!("cannot bin non-finite value {x}")));
    }
    let j = (x / sigma - 0.5).ceil();
    // i64::MAX is not representable; 2^63 is the first float past it.
    if !(j >= i64::MIN as f64 && j < 9_223_372_036_854_775_808.0) {
        return Err(Error::Overflow(format!("bin index of {x} at width {sigma} exceeds i64")));
    }
    Ok(j as i64)
}

/// Decompose a positive finite `y` as `m * 2^e` with `m ∈ [1, 2)`.
fn frexp_unit(y: f64) -> (f64, i64) {
    debug_assert!(y > 0.0 && y.is_finite());
    let (y, shift) = if y < f64::MIN_POSITIVE { (y * 2f64.powi(64), -64) } else { (y, 0) };
    let bits = y.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let m = f64::from_bits((bits & ((1u64 << 52) - 1)) | (1023u64 << 52));
    (m, e + shift)
}

/// The `j` with `y ∈ (2^j, 2^(j+1)]`, exactly; `None` unless `y` is
/// positive and finite.
pub fn dyadic_bin_index(y: f64) -> Option<i64> {
    if !(y > 0.0 && y.is_finite()) {
        return None;
    }
    let (m, e) = frexp_unit(y);
    Some(if m == 1.0 { e - 1 } else { e })
}

/// `⌊log2 y⌋` for positive finite `y`, exactly.
pub fn floor_log2(y: f64) -> Option<i64> {
    (y > 0.0 && y.is_finite()).then(|| frexp_unit(y).1)
}

/// `⌈log2 y⌉` for positive finite `y`, exactly.
pub fn ceil_log2(y: f64) -> Option<i64> {
    (y > 0.0 && y.is_finite()).then(|| {
        let (m, e) = frexp_unit(y);
        if m == 1.0 {
            e
        } else {
            e + 1
        }
    })
}

/// Bin counts of a dataset; only occupied bins are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCounts {
    pub entries: BTreeMap<i64, u64>,
    /// Dataset size, the denominator of every empirical probability.
    pub n: u64,
    /// Values outside a bounded scheme's index range.
    pub overflow: u64,
    /// Values that belong to no bin of the family (nonpositive values under
    /// a dyadic scheme).
    pub unbinned: u64,
}

impl SparseCounts {
    pub fn count(&self, j: i64) -> u64 {
        self.entries.get(&j).copied().unwrap_or(0)
    }

    pub fn binned(&self) -> u64 {
        self.entries.values().sum()
    }
}

pub fn empirical_counts(s: &Sample, scheme: &BinningScheme) -> SparseCounts {
    counts_of(s.values(), scheme)
}

/// As [`empirical_counts`] on a raw slice; non-finite values are tallied as
/// unbinned.
pub(crate) fn counts_of(values: &[f64], scheme: &BinningScheme) -> SparseCounts {
    let mut counts = SparseCounts {
        entries: BTreeMap::new(),
        n: values.len() as u64,
        overflow: 0,
        unbinned: 0,
    };
    for &x in values {
        match scheme.raw_index(x) {
            Ok(Some(j)) if scheme.in_range(j) => *counts.entries.entry(j).or_insert(0) += 1,
            Ok(Some(_)) | Err(Error::Overflow(_)) => counts.overflow += 1,
            Ok(None) | Err(_) => counts.unbinned += 1,
        }
    }
    counts
}

/// Released histogram: noisy probability per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyHistogram {
    pub entries: BTreeMap<i64, f64>,
    pub mechanism: MechanismTag,
    /// Suppression threshold of the stability mechanism.
    pub threshold: Option<f64>,
    pub budget: PrivacyBudget,
}

/// Laplace scale of both histogram mechanisms.
pub fn histogram_noise_scale(epsilon: f64, n: u64) -> f64 {
    2.0 / (epsilon * n as f64)
}

/// Suppression threshold `2 log(2/delta) / (eps n) + 1/n`.
pub fn stability_threshold(budget: &PrivacyBudget, n: u64) -> f64 {
    let n = n as f64;
    2.0 * (2.0 / budget.delta).ln() / (budget.epsilon * n) + 1.0 / n
}

fn check_counts(c: &SparseCounts) -> Result<()> {
    if c.n == 0 {
        return Err(Error::invalid("histogram needs at least one observation"));
    }
    Ok(())
}

/// `(eps, 0)`-DP histogram: every bin of the finite family gets
/// `Lap(2 / (eps n))` noise, occupied or not.
pub fn laplace_histogram<R: NoiseSource + ?Sized>(
    c: &SparseCounts,
    scheme: &BinningScheme,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<NoisyHistogram> {
    check_counts(c)?;
    let (lo, hi) = scheme.range.ok_or(Error::RequiresStabilityMechanism)?;
    let k = scheme.bin_count().unwrap_or(u64::MAX);
    if k > MAX_DENSE_BINS {
        return Err(Error::Overflow(format!("{k} bins exceed the dense limit of 2^32")));
    }
    let scale = histogram_noise_scale(budget.epsilon, c.n);
    let n = c.n as f64;
    let mut entries = BTreeMap::new();
    for j in lo..=hi {
        let p_hat = c.count(j) as f64 / n;
        entries.insert(j, p_hat + rng.laplace(scale)?);
    }
    Ok(NoisyHistogram { entries, mechanism: MechanismTag::LaplaceHist, threshold: None, budget: *budget })
}

/// `(eps, delta)`-DP histogram over any countable family: occupied bins get
/// `Lap(2 / (eps n))` noise and are released only if the noisy value
/// reaches [`stability_threshold`].
pub fn stability_histogram<R: NoiseSource + ?Sized>(
    c: &SparseCounts,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<NoisyHistogram> {
    check_counts(c)?;
    if budget.is_pure() {
        return Err(Error::RequiresLaplaceMechanism);
    }
    if budget.delta >= 1.0 / c.n as f64 {
        return Err(Error::invalid(format!(
            "stability histogram needs delta < 1/n = {}, got {}",
            1.0 / c.n as f64,
            budget.delta
        )));
    }
    let scale = histogram_noise_scale(budget.epsilon, c.n);
    let t = stability_threshold(budget, c.n);
    let n = c.n as f64;
    let mut entries = BTreeMap::new();
    for (&j, &count) in &c.entries {
        let noisy = count as f64 / n + rng.laplace(scale)?;
        if noisy >= t {
            entries.insert(j, noisy);
        }
    }
    Ok(NoisyHistogram { entries, mechanism: MechanismTag::StabilityHist, threshold: Some(t), budget: *budget })
}

/// Laplace histogram when `K < 2/delta` (always when `delta = 0`), stability
/// histogram otherwise.
pub fn select_mechanism(k: f64, delta: f64) -> MechanismTag {
    if delta == 0.0 || k < 2.0 / delta {
        MechanismTag::LaplaceHist
    } else {
        MechanismTag::StabilityHist
    }
}

/// Run whichever mechanism [`select_mechanism`] picks for the scheme's bin
/// count. The stability branch ignores any range restriction of the scheme.
pub fn private_histogram<R: NoiseSource + ?Sized>(
    c: &SparseCounts,
    scheme: &BinningScheme,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<NoisyHistogram> {
    match select_mechanism(scheme.bin_count_ext(), budget.delta) {
        MechanismTag::LaplaceHist => laplace_histogram(c, scheme, budget, rng),
        MechanismTag::StabilityHist => stability_histogram(c, budget, rng),
    }
}

/// Index of the largest released value, smallest index on ties; `None` for
/// an empty release.
pub fn heaviest_bin(h: &NoisyHistogram) -> Option<i64> {
    let mut best: Option<(i64, f64)> = None;
    for (&j, &p) in &h.entries {
        if best.is_none_or(|(_, q)| p > q) {
            best = Some((j, p));
        }
    }
    best.map(|(j, _)| j)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

/// The two privacy terms `(log(2K/alpha), log(4/(alpha delta)))`, each `inf`
/// when its branch is unavailable.
fn privacy_logs(k: f64, budget: &PrivacyBudget, alpha: f64) -> Result<(f64, f64)> {
    if k.is_nan() || k < 1.0 {
        return Err(Error::invalid(format!("bin count must be at least 1, got {k}")));
    }
    let k_log = if k.is_infinite() { f64::INFINITY } else { (2.0 * k / alpha).ln() };
    let d_log = if budget.is_pure() { f64::INFINITY } else { (4.0 / (alpha * budget.delta)).ln() };
    if k_log.is_infinite() && d_log.is_infinite() {
        return Err(Error::UnsupportedPureDpUnbounded(
            "an infinite bin family has no pure-DP histogram".into(),
        ));
    }
    Ok((k_log, d_log))
}

/// Smallest `n` for which the dispatched histogram learner is within `beta`
/// of the true bin probabilities, in every bin, with probability `1 - alpha`:
///
/// `⌈max{ min{ 8/(eps beta) log(2K/alpha), 8/(eps beta) log(4/(alpha delta)) },
///        1/(2 beta^2) log(4/alpha) }⌉`
///
/// `k` may be `inf`. Saturates at `u64::MAX`.
pub fn required_n(k: f64, budget: &PrivacyBudget, alpha: f64, beta: f64) -> Result<u64> {
    check_unit("alpha", alpha)?;
    check_unit("beta", beta)?;
    let (k_log, d_log) = privacy_logs(k, budget, alpha)?;
    let privacy = 8.0 / (budget.epsilon * beta) * k_log.min(d_log);
    let sampling = (4.0 / alpha).ln() / (2.0 * beta * beta);
    Ok(privacy.max(sampling).ceil() as u64)
}

/// Accuracy achieved at sample size `n`; the inverse of [`required_n`]:
///
/// `max{ min{ 8/(eps n) log(2K/alpha), 8/(eps n) log(4/(alpha delta)) },
///       sqrt(log(4/alpha) / (2n)) }`
pub fn error_width_beta(n: u64, k: f64, budget: &PrivacyBudget, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    check_unit("alpha", alpha)?;
    let (k_log, d_log) = privacy_logs(k, budget, alpha)?;
    let n = n as f64;
    let privacy = 8.0 / (budget.epsilon * n) * k_log.min(d_log);
    let sampling = ((4.0 / alpha).ln() / (2.0 * n)).sqrt();
    Ok(privacy.max(sampling))
}
