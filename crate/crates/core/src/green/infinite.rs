//! Green's function of the simple random walk on all of `Z^d`, `d >= 3`.
//!
//! Starting from `G(0,x) = (2π)^{-d} ∫ cos(θ·x) / (1 - d^{-1} Σ cos θ_i) dθ`,
//! the integral over the axis with the largest `|x_i|` is done in closed form
//! with `∫ cos(nθ)/(a - cos θ) dθ/2π = z^{|n|}/√(a²-1)`, `z = a - √(a²-1)`,
//! which leaves
//!
//! `G(0,x) = d π^{1-d} ∫_{[0,π]^{d-1}} Π cos(x_i t_i) · z^{|x_m|} / √((a-1)(a+1)) dt`
//!
//! with `a - 1 = Σ 2 sin²(t_i/2)`. The remaining singularity at `t = 0` is
//! integrable and is resolved by nested adaptive Gauss–Kronrod quadrature.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use libm::tgamma as gamma;

use crate::error::{GffError, Result};
use crate::numerics::integrate;

const ABS_TOL: f64 = 1e-10;
const REL_TOL: f64 = 1e-8;
const MAX_PANELS: usize = 4000;

/// `G(0, x)` on `Z^d`.
pub fn green_infinite(d: usize, x: &[i64]) -> Result<f64> {
    if d < 3 {
        return Err(GffError::domain(format!("the walk on Z^{d} is recurrent; infinite-volume Green needs d >= 3")));
    }
    if x.len() != d {
        return Err(GffError::domain(format!("coordinate has {} entries, expected {d}", x.len())));
    }
    let mut abs: Vec<u64> = x.iter().map(|c| c.unsigned_abs()).collect();
    abs.sort_unstable();
    let m = abs[d - 1] as f64;
    let rest: Vec<f64> = abs[..d - 1].iter().map(|&c| c as f64).collect();
    let mut t = vec![0.0; d - 1];
    let value = nested(&rest, m, &mut t, 0, 0.0, 1.0)?;
    Ok(d as f64 * PI.powi(1 - d as i32) * value)
}

/// Integrates over `t[level..]` given the partial sum `s = Σ 2 sin²(t_i/2)` and
/// cosine product of the outer coordinates.
fn nested(rest: &[f64], m: f64, t: &mut Vec<f64>, level: usize, s: f64, prod: f64) -> Result<f64> {
    let last = level + 1 == rest.len();
    let c = rest[level];
    let mut failure = None;
    let q = integrate(
        |ti: f64| {
            let sh = (0.5 * ti).sin();
            let s2 = s + 2.0 * sh * sh;
            let p = prod * (c * ti).cos();
            if last {
                kernel(s2, m) * p
            } else {
                t[level] = ti;
                match nested(rest, m, t, level + 1, s2, p) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            }
        },
        0.0,
        PI,
        if last { ABS_TOL * 1e-2 } else { ABS_TOL },
        if last { REL_TOL * 1e-2 } else { REL_TOL },
        MAX_PANELS,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

/// `z^m / √((a-1)(a+1))` with `s = a - 1`.
#[inline]
fn kernel(s: f64, m: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let root = (s * (2.0 + s)).sqrt();
    let decay = if m == 0.0 { 1.0 } else { (-m * (s + root).ln_1p()).exp() };
    decay / root
}

/// `σ_d² = G(0,0)` and `c_d` with `G(0,x) ~ c_d |x|^{2-d}`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LatticeConstants {
    pub d: usize,
    pub sigma2: f64,
    pub c_d: f64,
}

impl LatticeConstants {
    pub fn new(d: usize) -> Result<Self> {
        let sigma2 = green_infinite(d, &vec![0; d])?;
        let h = d as f64 / 2.0;
        let c_d = h * gamma(h - 1.0) / PI.powf(h);
        Ok(LatticeConstants { d, sigma2, c_d })
    }
}

/// `G(0,x)` for every `x` with `|x|_∞ <= max`, computed once per sorted
/// tuple of absolute coordinates.
#[derive(Debug, Clone)]
pub struct InfiniteGreenTable {
    d: usize,
    max: usize,
    values: Vec<f64>,
}

impl InfiniteGreenTable {
    pub fn build(d: usize, max: usize) -> Result<Self> {
        if d < 3 {
            return Err(GffError::domain("infinite-volume Green needs d >= 3"));
        }
        let side = max + 1;
        let len = side
            .checked_pow(d as u32)
            .ok_or_else(|| GffError::Capacity(format!("offset table of side {side} overflows")))?;
        let mut values = vec![f64::NAN; len];
        let mut coord = vec![0i64; d];
        for idx in 0..len {
            let mut rem = idx;
            for c in coord.iter_mut().rev() {
                *c = (rem % side) as i64;
                rem /= side;
            }
            if coord.windows(2).all(|w| w[0] <= w[1]) {
                values[idx] = green_infinite(d, &coord)?;
            }
        }
        let mut table = InfiniteGreenTable { d, max, values };
        for idx in 0..len {
            if table.values[idx].is_nan() {
                let mut rem = idx;
                for c in coord.iter_mut().rev() {
                    *c = (rem % side) as i64;
                    rem /= side;
                }
                coord.sort_unstable();
                table.values[idx] = table.values[table.offset(&coord)];
            }
        }
        Ok(table)
    }

    /// Table shared across the process, grown on demand.
    pub fn shared(d: usize, max: usize) -> Result<Arc<Self>> {
        static TABLES: OnceLock<Mutex<HashMap<usize, Arc<InfiniteGreenTable>>>> = OnceLock::new();
        let tables = TABLES.get_or_init(Default::default);
        let mut guard = tables.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = guard.get(&d) {
            if t.max >= max {
                return Ok(t.clone());
            }
        }
        let t = Arc::new(Self::build(d, max)?);
        guard.insert(d, t.clone());
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_offset(&self) -> usize {
        self.max
    }

    fn offset(&self, abs: &[i64]) -> usize {
        abs.iter().fold(0, |acc, &c| acc * (self.max + 1) + c as usize)
    }

    /// `G(0, x)`; panics if `|x|_∞` exceeds the table range.
    pub fn get(&self, x: &[i64]) -> f64 {
        let mut idx = 0;
        for &c in x {
            let a = c.unsigned_abs() as usize;
            assert!(a <= self.max, "offset {x:?} outside table of range {}", self.max);
            idx = idx * (self.max + 1) + a;
        }
        self.values[idx]
    }
}

/// `G_R(0,0)` for the box of radius `R` killed on its internal boundary, from
/// the sine eigenbasis of the interior: only odd modes see the center.
pub fn box_origin_green(d: usize, r: usize) -> f64 {
    let n1 = 2 * r; // interior side plus one
    let cosines: Vec<f64> = (1..n1).step_by(2).map(|k| (k as f64 * PI / n1 as f64).cos()).collect();
    let w = (2.0 / n1 as f64).powi(d as i32);
    let inv_d = 1.0 / d as f64;
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let s: f64 = idx.iter().map(|&i| cosines[i]).sum();
        total += w / (1.0 - inv_d * s);
        let mut axis = 0;
        loop {
            if axis == d {
                return total;
            }
            idx[axis] += 1;
            if idx[axis] < cosines.len() {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Extrapolates `G_R(0,0)` to `R = ∞` assuming `G_R = σ² + a/R + b/R²`, from
/// three radii.
pub fn sigma2_extrapolated(d: usize, radii: [usize; 3]) -> f64 {
    let pts: Vec<(f64, f64)> = radii.iter().map(|&r| (1.0 / r as f64, box_origin_green(d, r))).collect();
    // Lagrange interpolation in 1/R evaluated at 0
    let mut acc = 0.0;
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        let mut l = 1.0;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i != j {
                l *= xj / (xj - xi);
            }
        }
        acc += l * yi;
    }
    acc
}
