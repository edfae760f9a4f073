use std::f64::consts::PI;

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Upper tail `P(T_df > t)` for `t >= 0`, through the regularized incomplete
/// beta function. Picks whichever beta argument is smaller to keep precision
/// in both the far tail and the large-df regime.
fn upper_tail(df: f64, t: f64) -> f64 {
    let t2 = t * t;
    let x = df / (df + t2);
    if x < 0.5 {
        0.5 * beta_reg(0.5 * df, 0.5, x)
    } else {
        0.5 * (1.0 - beta_reg(0.5, 0.5 * df, t2 / (df + t2)))
    }
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(df: f64, t: f64) -> f64 {
    if t >= 0.0 {
        1.0 - upper_tail(df, t)
    } else {
        upper_tail(df, -t)
    }
}

pub fn student_t_pdf(df: f64, t: f64) -> f64 {
    let log_norm = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln();
    (log_norm - 0.5 * (df + 1.0) * (t * t / df).ln_1p()).exp()
}

/// Quantile of Student's t: the `t` with `CDF_df(t) = p`.
///
/// Solved for the upper tail `q = min(p, 1 - p)`: the root is bracketed by
/// doubling, then refined with Newton steps that fall back to bisection
/// whenever they leave the bracket. Iteration stops once the relative tail
/// residual is below `1e-14` (far inside the `1e-10` CDF tolerance) or the
/// bracket collapses.
pub fn student_t_quantile(df: u64, p: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::invalid("degrees of freedom must be at least 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let nu = df as f64;
    let q = if p > 0.5 { 1.0 - p } else { p };
    let root = solve_upper_tail(nu, q);
    Ok(if p > 0.5 { root } else { -root })
}

fn solve_upper_tail(nu: f64, q: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while upper_tail(nu, hi) > q {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::MAX;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let resid = upper_tail(nu, t) - q;
        if resid.abs() <= 1e-14 * q {
            break;
        }
        if resid > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // d(tail)/dt = -pdf
        let step = resid / student_t_pdf(nu, t);
        let newton = t + step;
        t = if newton > lo && newton < hi && step.is_finite() { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    t
}
