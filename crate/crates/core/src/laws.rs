//! Closed-form laws: hitting of a drifted line by Brownian motion, the
//! `f`/`g` bound functions, the supercritical limit and critical-window level
//! schedules.

use serde::{Deserialize, Serialize};

use crate::error::{GffError, Result};
use crate::numerics::{exp_times_normal_sf, integrate, mills_ratio, normal_cdf, normal_pdf, normal_sf};

/// `P(τ ≤ T)` for `τ = inf{t > 0 : B_t ≤ m t − b}`:
/// `Φ̄(b/√T − m√T) + e^{2bm} Φ̄(b/√T + m√T)`.
pub fn drift_hit_cdf(m: f64, b: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(GffError::domain(format!("horizon must be positive, got {t}")));
    }
    if !(b >= 0.0) || !m.is_finite() || !b.is_finite() {
        return Err(GffError::domain(format!("need finite m and b >= 0, got m = {m}, b = {b}")));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let s = t.sqrt();
    let p = normal_sf(b / s - m * s) + exp_times_normal_sf(2.0 * b * m, b / s + m * s);
    Ok(p.clamp(0.0, 1.0))
}

/// `P(B_t > −h t − b for all t) = 1 − e^{−2bh}`.
pub fn survival_prob_negative_drift(h: f64, b: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(GffError::domain(format!("drift level must be positive, got {h}")));
    }
    if !(b >= 0.0) {
        return Err(GffError::domain(format!("gap must be nonnegative, got {b}")));
    }
    Ok(-(-2.0 * b * h).exp_m1())
}

fn check_y(y: f64) -> Result<()> {
    if !(y >= 0.0) {
        return Err(GffError::domain(format!("y must be nonnegative, got {y}")));
    }
    Ok(())
}

/// `f(x, y) = Φ̄(x − y) − e^{2xy} Φ̄(x + y)`.
pub fn f_bound(x: f64, y: f64) -> Result<f64> {
    check_y(y)?;
    Ok(f_raw(x, y))
}

/// `1 − f(x, y) = Φ(x − y) + e^{2xy} Φ̄(x + y)`, accurate when `f` is near one.
pub fn f_bound_complement(x: f64, y: f64) -> Result<f64> {
    check_y(y)?;
    Ok(normal_cdf(x - y) + exp_times_normal_sf(2.0 * x * y, x + y))
}

pub(crate) fn f_raw(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    normal_sf(x - y) - exp_times_normal_sf(2.0 * x * y, x + y)
}

/// `g(x, y) = 1 − x Φ̄(x + y) / φ(x + y)`.
pub fn g_bound(x: f64, y: f64) -> Result<f64> {
    check_y(y)?;
    Ok(1.0 - x * mills_ratio(x + y))
}

/// `∂f/∂y = 2 g(x, y) φ(x − y)`.
pub fn f_bound_dy(x: f64, y: f64) -> Result<f64> {
    Ok(2.0 * g_bound(x, y)? * normal_pdf(x - y))
}

/// `E[(1 − e^{−2h(φ+h)/σ²}) 1_{φ > −h}]` for `φ ~ N(0, σ²)`, by adaptive
/// quadrature on `(−h, h + 12σ)`.
pub fn supercritical_limit(h: f64, sigma2: f64) -> Result<f64> {
    if !(h > 0.0) || !(sigma2 > 0.0) || !h.is_finite() || !sigma2.is_finite() {
        return Err(GffError::domain(format!("need h > 0 and sigma^2 > 0, got h = {h}, sigma^2 = {sigma2}")));
    }
    let sigma = sigma2.sqrt();
    let q = integrate(
        |x: f64| -(-2.0 * h * (x + h) / sigma2).exp_m1() * normal_pdf(x / sigma) / sigma,
        -h,
        h + 12.0 * sigma,
        1e-11,
        0.0,
        2000,
    )?;
    // the omitted tail is below Φ̄(12) ≈ 2e-33
    Ok(q.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSchedule {
    /// `c N^{-1/2}`
    InvSqrt,
    /// `c √(log N / N)`
    SqrtLog,
    /// `c √(log N · log log N / N)`
    SqrtLogLogLog,
}

impl LevelSchedule {
    pub const ALL: [LevelSchedule; 3] = [LevelSchedule::InvSqrt, LevelSchedule::SqrtLog, LevelSchedule::SqrtLogLogLog];

    /// Unscaled form at `n`.
    fn shape(self, n: f64) -> f64 {
        match self {
            LevelSchedule::InvSqrt => n.powf(-0.5),
            LevelSchedule::SqrtLog => (n.ln() / n).sqrt(),
            LevelSchedule::SqrtLogLogLog => (n.ln() * n.ln().ln() / n).sqrt(),
        }
    }
}

/// A level `h_N` together with its size relative to each schedule shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowLevel {
    pub n: f64,
    pub h: f64,
    /// `h_N √N`
    pub vs_inv_sqrt: f64,
    /// `h_N / √(log N / N)`
    pub vs_sqrt_log: f64,
    /// `h_N / √(log N log log N / N)`
    pub vs_sqrt_log_loglog: f64,
}

pub fn critical_window_envelopes(schedule: LevelSchedule, c: f64, n: f64) -> Result<WindowLevel> {
    if !(n >= 3.0) || !n.is_finite() {
        return Err(GffError::domain(format!("N must be at least 3, got {n}")));
    }
    if !c.is_finite() {
        return Err(GffError::domain("schedule coefficient must be finite"));
    }
    let h = c * schedule.shape(n);
    Ok(WindowLevel {
        n,
        h,
        vs_inv_sqrt: h / LevelSchedule::InvSqrt.shape(n),
        vs_sqrt_log: h / LevelSchedule::SqrtLog.shape(n),
        vs_sqrt_log_loglog: h / LevelSchedule::SqrtLogLogLog.shape(n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hitting_examples() {
        assert_eq!(drift_hit_cdf(0.7, 0.0, 2.0).unwrap(), 1.0);
        let p = drift_hit_cdf(0.0, 1.0, 1.0).unwrap();
        assert!((p - 0.317_310_507_862_914_1).abs() < 1e-14);
        let p = drift_hit_cdf(1.0, 1.0, 1.0).unwrap();
        assert!((p - (0.5 + 2f64.exp() * normal_sf(2.0))).abs() < 1e-14);
        assert!((p - 0.668_10).abs() < 1e-5);
        assert!(drift_hit_cdf(1.0, 1.0, 0.0).is_err());
        // huge 2bm stays finite
        assert!(drift_hit_cdf(40.0, 40.0, 1.0).unwrap() <= 1.0);
    }

    #[test]
    fn survival_examples() {
        assert_eq!(survival_prob_negative_drift(1.0, 0.0).unwrap(), 0.0);
        let b = 2f64.ln() / 2.0;
        assert!((survival_prob_negative_drift(1.0, b).unwrap() - 0.5).abs() < 1e-15);
        assert!((survival_prob_negative_drift(1.0, 1.0).unwrap() - 0.864_664_716_763_387_3).abs() < 1e-15);
        assert!(survival_prob_negative_drift(0.0, 1.0).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(f_bound(1.3, 0.0).unwrap(), 0.0);
        assert_eq!(g_bound(0.0, 2.0).unwrap(), 1.0);
        assert!((f_bound(0.0, 1.0).unwrap() - 0.682_689_492_137_085_9).abs() < 1e-15);
        assert!(f_bound(0.0, -1.0).is_err());
    }

    #[test]
    fn supercritical_extremes() {
        assert!(supercritical_limit(1e-4, 1.5164).unwrap() < 1e-3);
        assert!(supercritical_limit(10.0, 1.5164).unwrap() > 0.999);
        assert!(supercritical_limit(-1.0, 1.0).is_err());
    }

    #[test]
    fn schedule_examples() {
        let w = critical_window_envelopes(LevelSchedule::InvSqrt, 1.0, 100.0).unwrap();
        assert!((w.h - 0.1).abs() < 1e-15);
        let e2 = 1f64.exp().powi(2);
        let w = critical_window_envelopes(LevelSchedule::SqrtLog, 1.0, e2).unwrap();
        assert!((w.h - (2.0 / e2).sqrt()).abs() < 1e-15);
        assert!(critical_window_envelopes(LevelSchedule::InvSqrt, 1.0, 2.0).is_err());
    }
}
