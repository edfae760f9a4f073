//! Shared domain types: privacy budgets and their splits, confidence splits,
//! parameter bounds, samples, and the report returned by the interval
//! estimators.
//!
//! Extended reals (`R`, `sigma_max`, trivial interval endpoints) are plain
//! `f64` values that may be `±inf`; every constructor rejects NaN.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `(epsilon, delta)` differential privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "epsilon must be finite and positive, got {epsilon}"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::invalid(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn is_pure(&self) -> bool {
        self.delta == 0.0
    }
}

/// Sequential composition of a budget into parts. Epsilons and deltas sum
/// bit-exactly (left to right) to the total they were split from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSplit {
    pub parts: Vec<PrivacyBudget>,
}

impl BudgetSplit {
    pub fn total_epsilon(&self) -> f64 {
        self.parts.iter().fold(0.0, |acc, p| acc + p.epsilon)
    }

    pub fn total_delta(&self) -> f64 {
        self.parts.iter().fold(0.0, |acc, p| acc + p.delta)
    }

    pub fn part(&self, i: usize) -> PrivacyBudget {
        self.parts[i]
    }
}

/// Equal epsilon shares with the rounding residue absorbed by the last share.
fn equal_epsilon_shares(total: f64, parts: usize) -> Vec<f64> {
    let share = total / parts as f64;
    let mut shares = vec![share; parts];
    // The partial sum of k-1 equal shares lies within a factor of two of the
    // total for k in {2, 3}, so the subtraction below is exact and the
    // left-to-right sum reproduces `total`.
    let head = shares[..parts - 1].iter().fold(0.0, |acc, s| acc + s);
    shares[parts - 1] = total - head;
    shares
}

/// Split `total` into 2 or 3 equal epsilon shares. All of delta goes to the
/// first part, which is the part that feeds the histogram learner.
pub fn split_budget(total: PrivacyBudget, parts: usize) -> Result<BudgetSplit> {
    if !matches!(parts, 2 | 3) {
        return Err(Error::invalid(format!("budget can be split into 2 or 3 parts, got {parts}")));
    }
    PrivacyBudget::new(total.epsilon, total.delta)?;
    let parts = equal_epsilon_shares(total.epsilon, parts)
        .into_iter()
        .enumerate()
        .map(|(i, epsilon)| PrivacyBudget {
            epsilon,
            delta: if i == 0 { total.delta } else { 0.0 },
        })
        .collect();
    Ok(BudgetSplit { parts })
}

/// Two-way split that halves both epsilon and delta; used by the
/// unknown-variance range estimator, whose two stages both consume a
/// histogram.
pub fn split_budget_halves(total: PrivacyBudget) -> Result<BudgetSplit> {
    PrivacyBudget::new(total.epsilon, total.delta)?;
    let eps = equal_epsilon_shares(total.epsilon, 2);
    let d0 = total.delta / 2.0;
    let d1 = total.delta - d0;
    Ok(BudgetSplit {
        parts: vec![
            PrivacyBudget { epsilon: eps[0], delta: d0 },
            PrivacyBudget { epsilon: eps[1], delta: d1 },
        ],
    })
}

/// How the total miscoverage `alpha` is divided across the sources of error.
///
/// * `alpha0`: sampling error of the (non-private) pivot
/// * `alpha1`: Laplace noise on the mean
/// * `alpha2`: range failure (known variance) or Laplace noise on the
///   variance (unknown variance)
/// * `alpha3`: range and scale failure (unknown variance only)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSplit {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl ConfidenceSplit {
    pub fn total(&self) -> f64 {
        self.alpha0 + self.alpha1 + self.alpha2 + self.alpha3
    }
}

/// Bounds on the unknown parameters: `mu ∈ (-big_r, big_r)` and
/// `sigma ∈ (sigma_min, sigma_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    #[serde(with = "ext_real")]
    pub big_r: f64,
    pub sigma_min: f64,
    #[serde(with = "ext_real")]
    pub sigma_max: f64,
}

impl ParameterBounds {
    pub fn new(big_r: f64, sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if big_r.is_nan() || big_r <= 0.0 {
            return Err(Error::invalid(format!("R must be positive (or inf), got {big_r}")));
        }
        if !(sigma_min.is_finite() && sigma_min >= 0.0) {
            return Err(Error::invalid(format!(
                "sigma_min must be finite and nonnegative, got {sigma_min}"
            )));
        }
        if sigma_max.is_nan() || sigma_max <= sigma_min {
            return Err(Error::invalid(format!(
                "need sigma_min < sigma_max, got ({sigma_min}, {sigma_max})"
            )));
        }
        Ok(Self { big_r, sigma_min, sigma_max })
    }

    /// No assumptions at all; only usable with `delta > 0`.
    pub fn unbounded() -> Self {
        Self { big_r: f64::INFINITY, sigma_min: 0.0, sigma_max: f64::INFINITY }
    }
}

/// An ordered list of finite observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sample must contain at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "sample value at index {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Project every value onto `[lo, hi]`, preserving length and order.
pub fn clamp_sample(s: &Sample, lo: f64, hi: f64) -> Result<Sample> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::invalid(format!("clamp bounds must satisfy lo <= hi, got [{lo}, {hi}]")));
    }
    Ok(Sample {
        values: s.values.iter().map(|&x| x.max(lo).min(hi)).collect(),
    })
}

/// A confidence interval. When `trivial` is set the gate failed and the
/// interval is the whole parameter range `(-R, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    #[serde(with = "ext_real")]
    pub lo: f64,
    #[serde(with = "ext_real")]
    pub hi: f64,
    pub trivial: bool,
}

impl IntervalEstimate {
    pub fn centered(center: f64, half_width: f64) -> Self {
        Self { lo: center - half_width, hi: center + half_width, trivial: false }
    }

    pub fn trivial(big_r: f64) -> Self {
        Self { lo: -big_r, hi: big_r, trivial: true }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Which histogram learner a range stage used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismTag {
    LaplaceHist,
    StabilityHist,
}

/// The user-facing result of a private confidence interval computation.
///
/// `width` is the canonical interval width computed from the data-independent
/// formula; `interval.hi - interval.lo` equals it up to rounding at the
/// magnitude of the endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub interval: IntervalEstimate,
    #[serde(with = "ext_real")]
    pub width: f64,
    pub gate_passed: bool,
    pub split: ConfidenceSplit,
    pub budget_split: BudgetSplit,
    pub mechanism_tag: MechanismTag,
    pub seed: u64,
    /// Scale estimate used by the unknown-variance path.
    pub sigma_hat: Option<f64>,
    /// Set when the noisy variance was negative with `sigma_max = inf` and
    /// was replaced by `w0^2`.
    pub variance_fallback: bool,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    Ok(())
}

pub(crate) fn check_range_bound(budget: &PrivacyBudget, big_r: f64) -> Result<()> {
    if big_r.is_nan() || big_r <= 0.0 {
        return Err(Error::invalid(format!("R must be positive (or inf), got {big_r}")));
    }
    if budget.is_pure() && big_r.is_infinite() {
        return Err(Error::UnsupportedPureDpUnbounded(
            "R = inf is only supported when delta > 0".into(),
        ));
    }
    Ok(())
}

/// Validate a full request: budget, bounds, `alpha ∈ (0, 1/2)`, and the rule
/// that pure DP needs finite `R`, finite `sigma_max` and positive `sigma_min`.
pub fn validate_inputs(budget: &PrivacyBudget, bounds: &ParameterBounds, alpha: f64) -> Result<()> {
    PrivacyBudget::new(budget.epsilon, budget.delta)?;
    ParameterBounds::new(bounds.big_r, bounds.sigma_min, bounds.sigma_max)?;
    check_range_bound(budget, bounds.big_r)?;
    if budget.is_pure() && (bounds.sigma_max.is_infinite() || bounds.sigma_min == 0.0) {
        return Err(Error::UnsupportedPureDpUnbounded(
            "delta = 0 requires 0 < sigma_min and finite sigma_max".into(),
        ));
    }
    check_alpha(alpha)
}

/// Serde adapter for extended reals: finite values are JSON numbers,
/// infinities are the strings `"inf"` / `"-inf"`.
pub mod ext_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            Err(serde::ser::Error::custom("NaN is not an extended real"))
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("not an extended real: {other}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_three_ways_pure() {
        let split = split_budget(PrivacyBudget::new(0.6, 0.0).unwrap(), 3).unwrap();
        assert_eq!(split.parts.len(), 3);
        for p in &split.parts {
            assert!((p.epsilon - 0.2).abs() < 1e-15);
            assert_eq!(p.delta, 0.0);
        }
        assert_eq!(split.total_epsilon(), 0.6);
    }

    #[test]
    fn split_two_ways_delta_rides_with_first_part() {
        let split = split_budget(PrivacyBudget::new(1.0, 1e-6).unwrap(), 2).unwrap();
        assert_eq!(split.parts[0], PrivacyBudget { epsilon: 0.5, delta: 1e-6 });
        assert_eq!(split.parts[1], PrivacyBudget { epsilon: 0.5, delta: 0.0 });
    }

    #[test]
    fn split_rejects_other_part_counts() {
        let b = PrivacyBudget::new(0.3, 0.0).unwrap();
        assert!(matches!(split_budget(b, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(split_budget(b, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn clamp_examples() {
        let s = Sample::new(vec![-3.0, 0.0, 5.0]).unwrap();
        assert_eq!(clamp_sample(&s, -1.0, 2.0).unwrap().values(), &[-1.0, 0.0, 2.0]);
        let s = Sample::new(vec![0.5]).unwrap();
        assert_eq!(clamp_sample(&s, 0.0, 1.0).unwrap().values(), &[0.5]);
        assert!(clamp_sample(&s, 1.0, 0.0).is_err());
    }

    #[test]
    fn validate_examples() {
        let pure = PrivacyBudget::new(1.0, 0.0).unwrap();
        let unb = ParameterBounds::unbounded();
        assert!(matches!(
            validate_inputs(&pure, &unb, 0.05),
            Err(Error::UnsupportedPureDpUnbounded(_))
        ));
        let approx = PrivacyBudget::new(1.0, 1e-8).unwrap();
        validate_inputs(&approx, &unb, 0.05).unwrap();
        let bounded = ParameterBounds::new(10.0, 0.1, 10.0).unwrap();
        assert!(matches!(
            validate_inputs(&pure, &bounded, 0.7),
            Err(Error::InvalidArgument(_))
        ));
        validate_inputs(&pure, &bounded, 0.05).unwrap();
    }

    #[test]
    fn sample_rejects_non_finite() {
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sample::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn trivial_interval_spans_range() {
        let i = IntervalEstimate::trivial(f64::INFINITY);
        assert!(i.trivial && i.lo == f64::NEG_INFINITY && i.hi == f64::INFINITY);
        assert!(i.contains(1e300));
        let i = IntervalEstimate::trivial(10.0);
        assert_eq!(i.width(), 20.0);
    }

    #[test]
    fn ext_real_json() {
        let b = ParameterBounds::unbounded();
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"big_r":"inf","sigma_min":0.0,"sigma_max":"inf"}"#);
        let back: ParameterBounds = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }

    proptest! {
        #[test]
        fn budget_split_sums_exactly(eps in 1e-6f64..1e6, delta in 0.0f64..0.999, k in 2usize..=3) {
            let total = PrivacyBudget::new(eps, delta).unwrap();
            let split = split_budget(total, k).unwrap();
            prop_assert_eq!(split.total_epsilon(), eps);
            prop_assert_eq!(split.total_delta(), delta);
            let halves = split_budget_halves(total).unwrap();
            prop_assert_eq!(halves.total_epsilon(), eps);
            prop_assert_eq!(halves.total_delta(), delta);
        }

        #[test]
        fn clamp_is_idempotent_and_ordered(
            xs in proptest::collection::vec(-1e6f64..1e6, 1..50),
            a in -100.0f64..100.0,
            w in 0.0f64..100.0,
        ) {
            let s = Sample::new(xs.clone()).unwrap();
            let once = clamp_sample(&s, a, a + w).unwrap();
            let twice = clamp_sample(&once, a, a + w).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once.n(), xs.len());
            for (y, x) in once.values().iter().zip(&xs) {
                prop_assert!(*y >= a && *y <= a + w);
                if *x >= a && *x <= a + w { prop_assert_eq!(y, x); }
            }
            for pair in xs.iter().zip(once.values()).collect::<Vec<_>>().windows(2) {
                if pair[0].0 <= pair[1].0 { prop_assert!(pair[0].1 <= pair[1].1); }
            }
        }
    }
}
