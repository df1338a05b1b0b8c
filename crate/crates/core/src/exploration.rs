//! Exploration of a level-set cluster by integer-radius balls and the
//! martingale `M_k = E[X_A | field on R_k]`, `X_A = |A|^{-1} Σ_{v∈A} φ_v`.
//!
//! At step `k` the ball `I_k` holds `I_0` and every vertex within `k` open
//! hops of `I_0 ∩ {φ ≥ h}`; the revealed set `R_k` adds all neighbors of the
//! ball, whose values and edges were examined. The event `{R_k = R}` only
//! depends on the field on `R` and on independent bridge uniforms, so the
//! conditional law of the rest is the field killed on `R_k ∪ ∂V`, and
//!
//! * `M_k = Σ_u Hm_k(A, u) φ_u` (harmonic measure from a uniform point of `A`),
//! * `Var_k = |A|^{-2} Σ_{v,v'∈A} G_k(v, v')` with `G_k` killed on `R_k ∪ ∂V`.

use std::io::Write;

use serde::Serialize;

use crate::error::{GffError, Result};
use crate::green::{green_infinite, InfiniteGreenTable, KilledSystem};
use crate::lattice::{BoxSpec, Coord, VertexId};
use crate::percolation::distances_from;
use crate::sampler::{Field, MetricLevelSet};

fn check_set(spec: &BoxSpec, set: &[VertexId], name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(GffError::domain(format!("{name} must be nonempty")));
    }
    if let Some(v) = set.iter().find(|v| v.0 >= spec.vertex_count()) {
        return Err(GffError::domain(format!("{v:?} lies outside the box")));
    }
    Ok(())
}

fn with_shell(spec: &BoxSpec, ball: &[bool]) -> Vec<bool> {
    let mut out = ball.to_vec();
    for v in spec.ids() {
        if ball[v.0] {
            for u in spec.neighbor_ids(v) {
                out[u.0] = true;
            }
        }
    }
    out
}

fn mask_to_ids(mask: &[bool]) -> Vec<VertexId> {
    mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(VertexId(i))).collect()
}

/// Ball masks `I_0, I_1, ...` up to `k_max`, ending early once the ball stops
/// growing.
fn balls(ls: &MetricLevelSet, i0: &[VertexId], k_max: usize) -> Vec<Vec<bool>> {
    let dist = distances_from(ls, i0);
    let base = ls.spec.mask(i0);
    let mut out: Vec<Vec<bool>> = Vec::new();
    for k in 0..=k_max {
        let ball: Vec<bool> = base.iter().zip(&dist).map(|(&b, &d)| b || d <= k).collect();
        if out.last().is_some_and(|prev| prev == &ball) {
            break;
        }
        out.push(ball);
    }
    out
}

/// Revealed sets `R_0 ⊆ R_1 ⊆ ...`, each the ball plus its neighbor shell.
pub fn grow_ball(ls: &MetricLevelSet, i0: &[VertexId], k_max: usize) -> Result<Vec<Vec<VertexId>>> {
    check_set(&ls.spec, i0, "initial set")?;
    Ok(balls(ls, i0, k_max).iter().map(|b| mask_to_ids(&with_shell(&ls.spec, b))).collect())
}

/// Harmonic measure of `R ∪ ∂V` seen from a uniform point of `A`, and the
/// conditional variance of `X_A`.
struct StepSolve {
    hm: Vec<f64>,
    var: f64,
}

fn solve_step(spec: &BoxSpec, a: &[VertexId], revealed: &[bool]) -> Result<StepSolve> {
    let mut killed = revealed.to_vec();
    for v in spec.ids() {
        killed[v.0] |= spec.is_boundary(v);
    }
    let share = 1.0 / a.len() as f64;
    let mut g = vec![0.0; spec.vertex_count()];
    let mut direct = vec![0.0; spec.vertex_count()];
    for v in a {
        if killed[v.0] {
            direct[v.0] += share;
        } else {
            g[v.0] += share;
        }
    }
    let rhs = g.clone();
    let (mut hm, var) = if rhs.iter().any(|&x| x != 0.0) {
        let sys = KilledSystem::new(spec, killed)?;
        sys.solve(&mut g);
        let var = rhs.iter().zip(&g).map(|(r, x)| r * x).sum();
        (sys.flux(&g), var)
    } else {
        (vec![0.0; spec.vertex_count()], 0.0)
    };
    for (h, d) in hm.iter_mut().zip(&direct) {
        *h += d;
    }
    Ok(StepSolve { hm, var })
}

fn revealed_mask(spec: &BoxSpec, r: &[VertexId]) -> Result<Vec<bool>> {
    check_set(spec, r, "revealed set")?;
    Ok(spec.mask(r))
}

/// `E[X_A | field on R ∪ ∂V]`.
pub fn martingale_value(field: &Field, a: &[VertexId], r: &[VertexId]) -> Result<f64> {
    check_set(&field.spec, a, "target set")?;
    let step = solve_step(&field.spec, a, &revealed_mask(&field.spec, r)?)?;
    Ok(step.hm.iter().zip(&field.values).map(|(h, x)| h * x).sum())
}

/// `Var[X_A | field on R ∪ ∂V]`; depends on `R` only.
pub fn conditional_variance(spec: &BoxSpec, a: &[VertexId], r: &[VertexId]) -> Result<f64> {
    check_set(spec, a, "target set")?;
    Ok(solve_step(spec, a, &revealed_mask(spec, r)?)?.var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub k: usize,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_plus")]
    pub m_plus: f64,
    #[serde(rename = "M_minus")]
    pub m_minus: f64,
    pub var: f64,
    pub pi: f64,
    pub revealed_count: usize,
    /// Revealed vertices below the level.
    #[serde(skip)]
    pub below_count: usize,
}

/// A vertex entering the revealed set at step `k`, with its harmonic weight
/// `Hm_k(A, u)` at that step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reveal {
    pub vertex: VertexId,
    pub k: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationTrace {
    pub h: f64,
    pub steps: Vec<TraceStep>,
    pub reveals: Vec<Reveal>,
    /// Number of steps in which the ball grew; later steps repeat the last one.
    pub growth_steps: usize,
}

impl ExplorationTrace {
    /// `⟨M⟩_k = Var_0 − Var_k`.
    pub fn quadratic_variation(&self, k: usize) -> f64 {
        self.steps[0].var - self.steps[k].var
    }

    /// One JSON object per step with `k, M, M_plus, M_minus, var, pi, revealed_count`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Runs the exploration for `k = 0..=k_max`. Steps after the ball stops
/// growing repeat the final state.
pub fn track_exploration(
    field: &Field,
    ls: &MetricLevelSet,
    i0: &[VertexId],
    a: &[VertexId],
    k_max: usize,
) -> Result<ExplorationTrace> {
    let spec = &field.spec;
    if ls.spec != *spec {
        return Err(GffError::domain("level set and field live on different boxes"));
    }
    check_set(spec, i0, "initial set")?;
    check_set(spec, a, "target set")?;
    let h = ls.h;
    let ball_masks = balls(ls, i0, k_max);
    let mut steps = Vec::with_capacity(k_max + 1);
    let mut reveals = Vec::new();
    let mut seen = vec![false; spec.vertex_count()];
    for (k, ball) in ball_masks.iter().enumerate() {
        let revealed = with_shell(spec, ball);
        let step = solve_step(spec, a, &revealed)?;
        let (mut m, mut m_plus, mut m_minus, mut pi) = (0.0, 0.0, 0.0, 0.0);
        let mut count = 0;
        let mut below = 0;
        for v in spec.ids() {
            let w = step.hm[v.0];
            let phi = field.values[v.0];
            m += w * phi;
            if revealed[v.0] {
                count += 1;
                below += usize::from(phi < h);
                pi += w;
                if phi >= h {
                    m_plus += w * (phi - h);
                } else {
                    m_minus += w * (phi - h);
                }
                if !seen[v.0] {
                    seen[v.0] = true;
                    reveals.push(Reveal { vertex: v, k, weight: w });
                }
            }
        }
        steps.push(TraceStep { k, m, m_plus, m_minus, var: step.var, pi, revealed_count: count, below_count: below });
    }
    let growth_steps = steps.len() - 1;
    while steps.len() <= k_max {
        let mut last = *steps.last().expect("at least one step");
        last.k += 1;
        steps.push(last);
    }
    Ok(ExplorationTrace { h, steps, reveals, growth_steps })
}

/// Sizes `|B_j|` and weight sums `W_j` of the above-level vertices revealed at
/// steps `k >= 1`, with `B_0 = {φ − h <= s}` and
/// `B_j = {2^{j−1} s < φ − h <= 2^j s}`, `s = √(log N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelProfile {
    pub sizes: Vec<usize>,
    pub weights: Vec<f64>,
}

pub fn level_band(excess: f64, scale: f64) -> usize {
    let mut j = 0;
    let mut top = scale;
    while excess > top {
        j += 1;
        top *= 2.0;
    }
    j
}

pub fn level_profile(field: &Field, trace: &ExplorationTrace, h: f64, n: usize) -> Result<LevelProfile> {
    if field.spec.dim() != 2 {
        return Err(GffError::domain("level profile is defined for planar traces"));
    }
    if n < 2 {
        return Err(GffError::domain("N must be at least 2"));
    }
    let scale = (n as f64).ln().sqrt();
    let mut sizes: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for r in trace.reveals.iter().filter(|r| r.k >= 1) {
        let excess = field.values[r.vertex.0] - h;
        if excess < 0.0 {
            continue;
        }
        let j = level_band(excess, scale);
        if sizes.len() <= j {
            sizes.resize(j + 1, 0);
            weights.resize(j + 1, 0.0);
        }
        sizes[j] += 1;
        weights[j] += r.weight;
    }
    Ok(LevelProfile { sizes, weights })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    /// `{0}`
    Point,
    /// `V_N`
    Box,
    Custom(Vec<Coord>),
}

impl TargetSet {
    fn coords(&self, d: usize, n: usize) -> Result<Vec<Coord>> {
        Ok(match self {
            TargetSet::Point => vec![vec![0; d]],
            TargetSet::Box => BoxSpec::new(d, n)?.box_vertices(),
            TargetSet::Custom(c) => {
                if c.is_empty() || c.iter().any(|x| x.len() != d) {
                    return Err(GffError::domain("custom target set must be nonempty with d coordinates each"));
                }
                if !c.iter().any(|x| x.iter().all(|&v| v == 0)) {
                    return Err(GffError::domain("custom target set must contain the origin"));
                }
                c.clone()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Capacity {
    /// `(Hm(x_K, S) − Hm(x_K, 0)) / G(0, x_K)`
    pub value: f64,
    pub hit_set: f64,
    pub hit_origin: f64,
    pub green: f64,
    /// Radius of the truncated domain, `None` for the whole lattice.
    pub radius: Option<usize>,
}

fn capacity_args(k: usize, n: usize, d: usize) -> Result<()> {
    if d < 3 {
        return Err(GffError::domain("capacity functional needs d >= 3"));
    }
    if k < 4 * n {
        return Err(GffError::domain(format!("separation K = {k} must be at least 4N = {}", 4 * n)));
    }
    Ok(())
}

/// Capacity functional at `x_K = K e_1` with hitting probabilities computed in
/// the box of radius `radius` (default `4K`) killed on its boundary.
pub fn capacity_functional(
    k: usize,
    n: usize,
    target: &TargetSet,
    d: usize,
    radius: Option<usize>,
) -> Result<Capacity> {
    capacity_args(k, n, d)?;
    let r = radius.unwrap_or(4 * k);
    let reach = target.coords(d, n)?.iter().flatten().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
    if r <= k.max(reach) {
        return Err(GffError::domain(format!("truncation radius {r} must exceed K and the target set")));
    }
    let spec = BoxSpec::new(d, r)?;
    let set: Vec<VertexId> =
        target.coords(d, n)?.iter().map(|c| spec.index_of(c).expect("target inside the box")).collect();
    let mut x = vec![0i64; d];
    x[0] = k as i64;
    let xk = spec.index_of(&x).expect("x_K inside the box");
    let o = spec.origin();
    let hit_set = hitting_probability_cg(&spec, &set, xk)?;
    let hit_origin = hitting_probability_cg(&spec, &[o], xk)?;
    let green = green_cg(&spec, o, xk)?;
    Ok(Capacity { value: (hit_set - hit_origin) / green, hit_set, hit_origin, green, radius: Some(r) })
}

/// Same functional on all of `Z^d`, from the equilibrium measure of `S`:
/// `P_x(hit S) = Σ_y G(x, y) e_S(y)` with `Σ_y G(z, y) e_S(y) = 1` on `S`.
pub fn capacity_functional_infinite(k: usize, n: usize, target: &TargetSet, d: usize) -> Result<Capacity> {
    capacity_args(k, n, d)?;
    let coords = target.coords(d, n)?;
    let reach = coords.iter().flatten().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
    let table = InfiniteGreenTable::shared(d, 2 * reach.max(1))?;
    let m = coords.len();
    let mut gram = faer::Mat::<f64>::zeros(m, m);
    let mut diff = vec![0i64; d];
    for i in 0..m {
        for j in 0..m {
            for (t, dt) in diff.iter_mut().enumerate() {
                *dt = coords[i][t] - coords[j][t];
            }
            gram[(i, j)] = table.get(&diff);
        }
    }
    let llt = gram
        .llt(faer::Side::Lower)
        .map_err(|e| GffError::Numeric(format!("equilibrium system is not positive definite: {e:?}")))?;
    let ones = faer::Mat::<f64>::from_fn(m, 1, |_, _| 1.0);
    let eq = faer::linalg::solvers::Solve::solve(&llt, &ones);
    let mut far = std::collections::HashMap::new();
    let mut hit_set = 0.0;
    for (i, y) in coords.iter().enumerate() {
        let mut key: Vec<u64> = (0..d).map(|t| ((if t == 0 { k as i64 } else { 0 }) - y[t]).unsigned_abs()).collect();
        key.sort_unstable();
        let g = match far.get(&key) {
            Some(&g) => g,
            None => {
                let c: Vec<i64> = key.iter().map(|&v| v as i64).collect();
                let g = green_infinite(d, &c)?;
                far.insert(key, g);
                g
            }
        };
        hit_set += g * eq[(i, 0)];
    }
    let mut xk = vec![0i64; d];
    xk[0] = k as i64;
    let green = green_infinite(d, &xk)?;
    let hit_origin = green / table.get(&vec![0; d]);
    Ok(Capacity { value: (hit_set - hit_origin) / green, hit_set, hit_origin, green, radius: None })
}

const CG_TOL: f64 = 1e-12;

/// Conjugate gradients for `Q_U u = b` on the free vertices `U` of `spec`
/// (killed on `killed ∪ ∂V`), matrix free.
fn cg(spec: &BoxSpec, killed: &[bool], b: &[f64]) -> Result<Vec<f64>> {
    let n = spec.vertex_count();
    let d = spec.dim();
    let inv = 1.0 / (2 * d) as f64;
    let free: Vec<bool> = spec.ids().map(|v| !killed[v.0] && !spec.is_boundary(v)).collect();
    let strides: Vec<usize> = (0..d).map(|a| spec.stride(a)).collect();
    // free vertices are interior, so all 2d neighbors exist
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            if !free[i] {
                out[i] = 0.0;
                continue;
            }
            let mut s = 0.0;
            for &st in &strides {
                if free[i - st] {
                    s += x[i - st];
                }
                if free[i + st] {
                    s += x[i + st];
                }
            }
            out[i] = x[i] - inv * s;
        }
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.iter().zip(&free).map(|(&v, &f)| if f { v } else { 0.0 }).collect();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let target = CG_TOL * CG_TOL * rr.max(f64::MIN_POSITIVE);
    for _ in 0..20 * n.max(100) {
        if rr <= target {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(GffError::Numeric("conjugate gradients did not converge".into()))
}

/// `P_x(hit S before ∂V)`.
fn hitting_probability_cg(spec: &BoxSpec, set: &[VertexId], x: VertexId) -> Result<f64> {
    let killed = spec.mask(set);
    if killed[x.0] {
        return Ok(1.0);
    }
    let inv = 1.0 / (2 * spec.dim()) as f64;
    let mut b = vec![0.0; spec.vertex_count()];
    for s in set {
        for u in spec.neighbor_ids(*s) {
            if !killed[u.0] {
                b[u.0] += inv;
            }
        }
    }
    Ok(cg(spec, &killed, &b)?[x.0])
}

fn green_cg(spec: &BoxSpec, source: VertexId, x: VertexId) -> Result<f64> {
    let mut b = vec![0.0; spec.vertex_count()];
    b[source.0] = 1.0;
    Ok(cg(spec, &vec![false; spec.vertex_count()], &b)?[x.0])
}
