use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{Error, Result};

/// Standard normal CDF, `0.5 * erfc(-x / sqrt(2))`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation for large `x`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

// Acklam's rational approximation to the normal quantile (|rel err| < 1.2e-9).
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// Quantile of the standard normal: the `x` with `Φ(x) = p`.
///
/// Rational initial guess, then one Halley step against the erfc-based CDF.
/// The lower half is solved directly and the upper half by symmetry, so the
/// residual is always computed on the small tail probability.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let x = acklam(p);
    let e = std_normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Maclaurin series for erf, summed in extended steps; accurate to ~1e-15
    /// for |x| <= 3. Independent of the statrs implementation.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        let mut k = 0.0;
        while term.abs() > 1e-18 {
            k += 1.0;
            term *= -x2 / k;
            sum += term / (2.0 * k + 1.0);
        }
        2.0 / PI.sqrt() * sum
    }

    fn cdf_oracle(x: f64) -> f64 {
        0.5 * (1.0 + erf_series(x / 2f64.sqrt()))
    }

    fn bisect_quantile_oracle(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf_oracle(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        for i in 0..=60 {
            let x = -3.0 + 0.1 * i as f64;
            assert!((std_normal_cdf(x) - cdf_oracle(x)).abs() < 1e-12, "x = {x}");
            assert!((std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn quantile_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        let z = std_normal_quantile(0.975).unwrap();
        assert!((z - bisect_quantile_oracle(0.975)).abs() < 1e-9);
        assert!((z - 1.959_963_984_540_054).abs() < 1e-9);
        for p in [0.0, 1.0, -0.1, 1.1, f64::NAN] {
            assert!(std_normal_quantile(p).is_err());
        }
    }

    #[test]
    fn quantile_round_trip_and_monotone() {
        let mut prev = f64::NEG_INFINITY;
        let grid: Vec<f64> = (0..=2000)
            .map(|i| 1e-6 + (1.0 - 2e-6) * i as f64 / 2000.0)
            .chain([1e-6, 1e-5, 1e-4, 0.024, 0.0243, 0.0245, 0.9757])
            .collect();
        for &p in &grid {
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() < 1e-9, "p = {p}");
        }
        for i in 0..=2000 {
            let p = 1e-6 + (1.0 - 2e-6) * i as f64 / 2000.0;
            let x = std_normal_quantile(p).unwrap();
            assert!(x > prev);
            prev = x;
        }
    }

    #[test]
    fn survival_matches_cdf_complement() {
        for x in [-2.0, 0.0, 1.0, 4.0] {
            assert!((std_normal_sf(x) - (1.0 - std_normal_cdf(x))).abs() < 1e-15);
        }
        assert!(std_normal_sf(10.0) > 0.0);
    }
}
