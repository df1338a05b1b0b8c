//! Estimators used by the experiment drivers.

use serde::Serialize;

use crate::error::{GffError, Result};
use crate::numerics::{compensated_sum, CompensatedSum};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Sample mean and standard error of the mean, summed with compensation so
/// the result does not depend on input order beyond rounding of the last bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = compensated_sum(xs.iter().copied()) / n as f64;
    if n == 1 {
        return MeanSe { mean, se: f64::NAN, n };
    }
    let mut ss = CompensatedSum::new();
    for &x in xs {
        ss.add((x - mean) * (x - mean));
    }
    let var = ss.value() / (n - 1) as f64;
    MeanSe { mean, se: (var / n as f64).sqrt(), n }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// One point of a power-law fit: size, estimate and its standard error
/// (`0` for exact input).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub n: f64,
    pub p: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// Weighted residual sum of squares in log space.
    pub residual: f64,
    pub exponent_se: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub points: usize,
}

/// Least squares for `log p = log A + b log n`, weighting each point by the
/// inverse variance of `log p` (`se / p` by the delta method). Points without
/// a positive standard error get equal weights. Nonpositive estimates are
/// dropped with a warning.
pub fn fit_power_law(points: &[FitPoint]) -> Result<PowerLawFit> {
    let kept: Vec<FitPoint> = points
        .iter()
        .copied()
        .filter(|pt| {
            let ok = pt.p > 0.0 && pt.p.is_finite() && pt.n > 0.0;
            if !ok {
                log::warn!("dropping nonpositive point p = {} at N = {} from power-law fit", pt.p, pt.n);
            }
            ok
        })
        .collect();
    if kept.len() < 3 {
        return Err(GffError::Fit(format!("power-law fit needs at least 3 positive points, got {}", kept.len())));
    }
    let weighted = kept.iter().all(|pt| pt.se > 0.0 && pt.se.is_finite());
    let w: Vec<f64> = kept.iter().map(|pt| if weighted { (pt.p / pt.se).powi(2) } else { 1.0 }).collect();
    let x: Vec<f64> = kept.iter().map(|pt| pt.n.ln()).collect();
    let y: Vec<f64> = kept.iter().map(|pt| pt.p.ln()).collect();
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(GffError::Fit("power-law fit needs at least two distinct N".into()));
    }
    let sxy: f64 = w.iter().zip(x.iter().zip(&y)).map(|(w, (x, y))| w * (x - xm) * (y - ym)).sum();
    let b = sxy / sxx;
    let a = ym - b * xm;
    let residual: f64 = w.iter().zip(x.iter().zip(&y)).map(|(w, (x, y))| w * (y - a - b * x).powi(2)).sum();
    let exponent_se = if weighted { (1.0 / sxx).sqrt() } else { (residual / (kept.len() - 2) as f64 / sxx).sqrt() };
    Ok(PowerLawFit {
        exponent: b,
        amplitude: a.exp(),
        residual,
        exponent_se,
        n_min: kept.iter().map(|pt| pt.n).fold(f64::INFINITY, f64::min),
        n_max: kept.iter().map(|pt| pt.n).fold(f64::NEG_INFINITY, f64::max),
        points: kept.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov–Smirnov test against `cdf`, with the asymptotic
/// Kolmogorov distribution and the Stephens small-sample correction.
pub fn ks_test(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let n = xs.len();
    if n == 0 {
        return KsResult { statistic: f64::NAN, p_value: f64::NAN, n };
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut dmax: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        dmax = dmax.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let sn = nf.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * dmax;
    KsResult { statistic: dmax, p_value: kolmogorov_sf(lambda), n }
}

/// `P(K > λ) = 2 Σ_{j>=1} (−1)^{j−1} e^{−2 j² λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}
