//! Green's functions of the continuous-time simple random walk on boxes of
//! `Z^d` with conductance `1/(2d)` per edge, killed on a vertex set.
//!
//! With unit jump rate the generator restricted to the free vertices is
//! `Q = I_deg - P`, and `G = Q^{-1}`; `G(u, v)` is the expected time spent at
//! `v` before killing, which equals the expected number of visits.

pub mod banded;
pub mod cache;
pub mod infinite;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

use crate::error::{GffError, Result};
use crate::lattice::{BoxSpec, VertexId};

pub use banded::BandedCholesky;
pub use infinite::{box_origin_green, green_infinite, sigma2_extrapolated, InfiniteGreenTable, LatticeConstants};

/// Factored generator of the walk killed on a vertex mask.
///
/// Rows of killed vertices are identity rows, so solutions vanish there
/// whenever the right-hand side does.
#[derive(Debug, Clone)]
pub struct KilledSystem {
    spec: BoxSpec,
    killed: Vec<bool>,
    chol: BandedCholesky,
}

impl KilledSystem {
    /// Factors the generator killed on `killed` (a mask over the box).
    ///
    /// Vertices of the box that are not killed keep only their in-box edges,
    /// so without killing on `∂V` the walk is reflected at the box surface.
    pub fn new(spec: &BoxSpec, killed: Vec<bool>) -> Result<Self> {
        if killed.len() != spec.vertex_count() {
            return Err(GffError::domain("killing mask does not match the box"));
        }
        if killed.iter().all(|&k| !k) {
            return Err(GffError::domain("killing set must be nonempty"));
        }
        let d = spec.dim();
        let bw = spec.stride(0);
        let inv = 1.0 / (2 * d) as f64;
        let chol = BandedCholesky::factor(spec.vertex_count(), bw, Some(&killed), |i, row| {
            let v = VertexId(i);
            row[bw] = spec.degree(v) as f64 * inv;
            for axis in 0..d {
                if spec.axis_coord(v, axis) > -(spec.radius() as i64) {
                    let j = i - spec.stride(axis);
                    if !killed[j] {
                        row[bw - spec.stride(axis)] = -inv;
                    }
                }
            }
        })?;
        Ok(KilledSystem { spec: *spec, killed, chol })
    }

    /// Killing on `∂V` plus the listed vertices.
    pub fn dirichlet(spec: &BoxSpec, extra: &[VertexId]) -> Result<Self> {
        let mut killed = vec![false; spec.vertex_count()];
        for v in spec.ids() {
            killed[v.0] = spec.is_boundary(v);
        }
        for v in extra {
            killed[v.0] = true;
        }
        Self::new(spec, killed)
    }

    pub(crate) fn from_parts(spec: BoxSpec, killed: Vec<bool>, chol: BandedCholesky) -> Result<Self> {
        if chol.dim() != spec.vertex_count() || chol.bandwidth() != spec.stride(0) || killed.len() != chol.dim() {
            return Err(GffError::Numeric("factor does not match the box".into()));
        }
        Ok(KilledSystem { spec, killed, chol })
    }

    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn killed(&self) -> &[bool] {
        &self.killed
    }

    pub fn factor(&self) -> &BandedCholesky {
        &self.chol
    }

    /// Replaces `rhs` by `G rhs`; entries of `rhs` on killed vertices are ignored.
    pub fn solve(&self, rhs: &mut [f64]) {
        for (x, &k) in rhs.iter_mut().zip(&self.killed) {
            if k {
                *x = 0.0;
            }
        }
        self.chol.solve_in_place(rhs);
    }

    /// `G(·, v)` as a vector over the whole box.
    pub fn column(&self, v: VertexId) -> Vec<f64> {
        let mut x = vec![0.0; self.spec.vertex_count()];
        if !self.killed[v.0] {
            x[v.0] = 1.0;
            self.solve(&mut x);
        }
        x
    }

    /// Rate at which the walk with occupation density `g` jumps into each
    /// killed vertex: `Σ_{x free, x ~ u} g(x) / (2d)`. Zero on free vertices.
    pub fn flux(&self, g: &[f64]) -> Vec<f64> {
        let inv = 1.0 / (2 * self.spec.dim()) as f64;
        let mut out = vec![0.0; self.spec.vertex_count()];
        for u in self.spec.ids() {
            if self.killed[u.0] {
                out[u.0] = self.spec.neighbor_ids(u).filter(|x| !self.killed[x.0]).map(|x| g[x.0]).sum::<f64>() * inv;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMode {
    /// Banded for `d = 2`; otherwise dense up to 5000 free vertices.
    Auto,
    Dense,
    Banded,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense {
        /// position of each box vertex among the free vertices
        slot: Vec<Option<usize>>,
        g: Mat<f64>,
    },
    Banded(KilledSystem),
}

/// Green's function of a box killed on a vertex set.
#[derive(Debug, Clone)]
pub struct GreenTable {
    spec: BoxSpec,
    killed: Vec<bool>,
    repr: Repr,
}

const DENSE_LIMIT: usize = 5000;

impl GreenMode {
    /// Concrete representation chosen for `free` unknowns in dimension `d`.
    pub fn resolve(self, d: usize, free: usize) -> GreenMode {
        match self {
            GreenMode::Auto if d == 2 || free > DENSE_LIMIT => GreenMode::Banded,
            GreenMode::Auto => GreenMode::Dense,
            m => m,
        }
    }
}

impl GreenTable {
    pub fn new(spec: &BoxSpec, killed: Vec<bool>, mode: GreenMode) -> Result<Self> {
        let free = killed.iter().filter(|&&k| !k).count();
        let repr = match mode.resolve(spec.dim(), free) {
            GreenMode::Dense => dense_inverse(spec, &killed)?,
            _ => Repr::Banded(KilledSystem::new(spec, killed.clone())?),
        };
        Ok(GreenTable { spec: *spec, killed, repr })
    }

    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn killed(&self) -> &[bool] {
        &self.killed
    }

    pub fn mode(&self) -> GreenMode {
        match self.repr {
            Repr::Dense { .. } => GreenMode::Dense,
            Repr::Banded(_) => GreenMode::Banded,
        }
    }

    pub fn system(&self) -> Option<&KilledSystem> {
        match &self.repr {
            Repr::Banded(sys) => Some(sys),
            Repr::Dense { .. } => None,
        }
    }

    /// `G(u, v)`. In banded mode this costs one solve.
    pub fn get(&self, u: VertexId, v: VertexId) -> f64 {
        match &self.repr {
            Repr::Dense { slot, g } => match (slot[u.0], slot[v.0]) {
                (Some(i), Some(j)) => g[(i, j)],
                _ => 0.0,
            },
            Repr::Banded(sys) => sys.column(v)[u.0],
        }
    }

    pub fn column(&self, v: VertexId) -> Vec<f64> {
        match &self.repr {
            Repr::Dense { slot, g } => {
                let mut out = vec![0.0; self.spec.vertex_count()];
                if let Some(j) = slot[v.0] {
                    for (u, s) in slot.iter().enumerate() {
                        if let Some(i) = s {
                            out[u] = g[(*i, j)];
                        }
                    }
                }
                out
            }
            Repr::Banded(sys) => sys.column(v),
        }
    }

    /// `G x` for a vector `x` over the box.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Dense { slot, g } => {
                let free: Vec<(usize, usize)> =
                    slot.iter().enumerate().filter_map(|(u, s)| s.map(|i| (u, i))).collect();
                let mut out = vec![0.0; self.spec.vertex_count()];
                for &(u, i) in &free {
                    out[u] = free.iter().map(|&(v, j)| g[(i, j)] * x[v]).sum();
                }
                out
            }
            Repr::Banded(sys) => {
                let mut y = x.to_vec();
                sys.solve(&mut y);
                y
            }
        }
    }

    pub(crate) fn dense_parts(&self) -> Option<(&[Option<usize>], &Mat<f64>)> {
        match &self.repr {
            Repr::Dense { slot, g } => Some((slot, g)),
            Repr::Banded(_) => None,
        }
    }

    pub(crate) fn from_dense(spec: &BoxSpec, killed: Vec<bool>, g: Mat<f64>) -> Result<Self> {
        let slot = free_slots(&killed);
        let free = slot.iter().flatten().count();
        if g.nrows() != free || g.ncols() != free {
            return Err(GffError::Numeric("dense table has the wrong shape".into()));
        }
        Ok(GreenTable { spec: *spec, killed, repr: Repr::Dense { slot, g } })
    }

    pub(crate) fn from_system(sys: KilledSystem) -> Self {
        GreenTable { spec: sys.spec, killed: sys.killed.clone(), repr: Repr::Banded(sys) }
    }
}

fn free_slots(killed: &[bool]) -> Vec<Option<usize>> {
    let mut next = 0;
    killed
        .iter()
        .map(|&k| {
            (!k).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn dense_inverse(spec: &BoxSpec, killed: &[bool]) -> Result<Repr> {
    if killed.len() != spec.vertex_count() {
        return Err(GffError::domain("killing mask does not match the box"));
    }
    let slot = free_slots(killed);
    let n = slot.iter().flatten().count();
    let inv = 1.0 / (2 * spec.dim()) as f64;
    let mut q = Mat::<f64>::zeros(n, n);
    for v in spec.ids() {
        let Some(i) = slot[v.0] else { continue };
        q[(i, i)] = spec.degree(v) as f64 * inv;
        for u in spec.neighbor_ids(v) {
            if let Some(j) = slot[u.0] {
                q[(i, j)] = -inv;
            }
        }
    }
    let llt = q.llt(Side::Lower).map_err(|e| GffError::Numeric(format!("generator factorization failed: {e:?}")))?;
    Ok(Repr::Dense { slot, g: llt.inverse() })
}

fn boundary_mask(spec: &BoxSpec) -> Vec<bool> {
    spec.ids().map(|v| spec.is_boundary(v)).collect()
}

/// Green's function of the box killed on its internal boundary `∂V`.
pub fn green_dirichlet(spec: &BoxSpec) -> Result<GreenTable> {
    green_dirichlet_with(spec, GreenMode::Auto)
}

pub fn green_dirichlet_with(spec: &BoxSpec, mode: GreenMode) -> Result<GreenTable> {
    GreenTable::new(spec, boundary_mask(spec), mode)
}

/// Green's function killed on `K ∪ ∂V`.
pub fn green_killed(spec: &BoxSpec, k: &[VertexId], mode: GreenMode) -> Result<GreenTable> {
    if k.is_empty() {
        return Err(GffError::domain("killing set must be nonempty"));
    }
    let mut killed = boundary_mask(spec);
    for v in k {
        if v.0 >= spec.vertex_count() {
            return Err(GffError::domain(format!("{v:?} lies outside the box")));
        }
        killed[v.0] = true;
    }
    GreenTable::new(spec, killed, mode)
}

#[derive(Debug, Clone)]
pub enum Source {
    Point(VertexId),
    /// Uniform starting point in the set.
    Uniform(Vec<VertexId>),
}

/// Hitting distribution of `K` from a source, before killing on `∂V` when
/// that applies.
#[derive(Debug, Clone)]
pub struct HarmonicMeasure {
    /// `(u, Hm(u))` for `u ∈ K` with positive mass, in index order.
    pub weights: Vec<(VertexId, f64)>,
    /// Mass absorbed by `∂V \ K`.
    pub escape: f64,
}

impl HarmonicMeasure {
    pub fn total(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w).sum()
    }

    pub fn weight(&self, u: VertexId) -> f64 {
        self.weights.binary_search_by_key(&u, |(v, _)| *v).map(|i| self.weights[i].1).unwrap_or(0.0)
    }
}

pub fn harmonic_measure(
    spec: &BoxSpec,
    source: &Source,
    k: &[VertexId],
    kill_on_outer: bool,
) -> Result<HarmonicMeasure> {
    if k.is_empty() {
        return Err(GffError::domain("target set must be nonempty"));
    }
    let sources: Vec<VertexId> = match source {
        Source::Point(v) => vec![*v],
        Source::Uniform(a) if a.is_empty() => return Err(GffError::domain("source set must be nonempty")),
        Source::Uniform(a) => a.clone(),
    };
    for v in sources.iter().chain(k) {
        if v.0 >= spec.vertex_count() {
            return Err(GffError::domain(format!("{v:?} lies outside the box")));
        }
    }
    let in_k = spec.mask(k);
    let mut killed = in_k.clone();
    if kill_on_outer {
        for v in spec.ids() {
            killed[v.0] |= spec.is_boundary(v);
        }
    }
    let share = 1.0 / sources.len() as f64;
    let mut rhs = vec![0.0; spec.vertex_count()];
    let mut direct = vec![0.0; spec.vertex_count()];
    for v in &sources {
        if killed[v.0] {
            direct[v.0] += share;
        } else {
            rhs[v.0] += share;
        }
    }
    let hit = if rhs.iter().any(|&x| x != 0.0) {
        let sys = KilledSystem::new(spec, killed.clone())?;
        sys.solve(&mut rhs);
        sys.flux(&rhs)
    } else {
        vec![0.0; spec.vertex_count()]
    };
    let mut weights = Vec::new();
    let mut escape = 0.0;
    for u in spec.ids() {
        let w = hit[u.0] + direct[u.0];
        if in_k[u.0] {
            if w > 0.0 {
                weights.push((u, w));
            }
        } else if killed[u.0] {
            escape += w;
        }
    }
    Ok(HarmonicMeasure { weights, escape })
}

/// Covariance of the metric-graph field at a point `r1` along the edge
/// `(u1, v1)` and a point `r2` along `(u2, v2)`, from the vertex values
/// `G(u1,u2)`, `G(u1,v2)`, `G(v1,u2)`, `G(v1,v2)`. Edges have unit length.
#[allow(clippy::too_many_arguments)]
pub fn interpolate_green(
    g_u1u2: f64,
    g_u1v2: f64,
    g_v1u2: f64,
    g_v1v2: f64,
    r1: f64,
    r2: f64,
    same_edge: bool,
    d: usize,
) -> Result<f64> {
    for r in [r1, r2] {
        if !(0.0..=1.0).contains(&r) {
            return Err(GffError::domain(format!("edge position {r} outside [0, 1]")));
        }
    }
    let mut g =
        (1.0 - r1) * (1.0 - r2) * g_u1u2 + r1 * r2 * g_v1v2 + (1.0 - r1) * r2 * g_u1v2 + r1 * (1.0 - r2) * g_v1u2;
    if same_edge {
        g += 2.0 * d as f64 * (r1.min(r2) - r1 * r2);
    }
    Ok(g)
}

/// `max_{u ∈ ∂V_{μN}} Σ_{v ∈ ∂V_{μN}} G_N(u, v)` for the planar box of radius `N`.
pub fn boundary_green_sum(spec: &BoxSpec, mu: f64) -> Result<f64> {
    if spec.dim() != 2 {
        return Err(GffError::domain("boundary Green sum is defined for d = 2"));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(GffError::domain(format!("mu must lie in (0, 1), got {mu}")));
    }
    let rho = (mu * spec.radius() as f64).floor() as usize;
    if rho == 0 {
        return Err(GffError::domain("mu N must be at least 1"));
    }
    let sys = KilledSystem::dirichlet(spec, &[])?;
    let ring = spec.sphere(rho);
    let mut x = vec![0.0; spec.vertex_count()];
    for v in &ring {
        x[v.0] = 1.0;
    }
    sys.solve(&mut x);
    Ok(ring.iter().map(|v| x[v.0]).fold(f64::NEG_INFINITY, f64::max))
}
