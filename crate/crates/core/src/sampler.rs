//! Exact samplers for the discrete field on a box and for its metric-graph
//! level sets.
//!
//! Conditionally on the vertex values, the field along an edge of unit length
//! is a Brownian bridge with variance profile `2d·r(1-r)`, so the bridge from
//! `a > h` to `b > h` stays above `h` with probability
//! `1 - exp(-(a-h)(b-h)/d)`. Edge interiors are never materialized; each edge
//! only carries an open/blocked bit.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::{cholesky_in_place, cholesky_in_place_scratch, LltRegularization};
use faer::linalg::matmul::triangular::{matmul, BlockStructure};
use faer::{Accum, Mat, Par};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GffError, Result};
use crate::green::{InfiniteGreenTable, KilledSystem};
use crate::lattice::{BoxSpec, VertexId};
use crate::rng::ReplicaRng;

/// Largest radius for which the dense infinite-volume covariance is factored.
pub const MAX_DENSE_RADIUS: usize = 10;

/// Upper bound on the band storage of the precision factor.
pub const MAX_BAND_BYTES: usize = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// Field on `V_N` pinned to zero on `∂V_N`.
    Dirichlet,
    /// Infinite-volume field (`d >= 3`) restricted to `V_N`.
    InfiniteRestricted,
    /// Dirichlet field on `V_{⌈κN⌉}` restricted to `V_N`; approximates the
    /// infinite-volume field with a bias that decreases in `κ`.
    DirichletProxy { kappa: f64 },
}

impl SamplerMode {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerMode::Dirichlet => "dirichlet",
            SamplerMode::InfiniteRestricted => "infinite_restricted",
            SamplerMode::DirichletProxy { .. } => "dirichlet_proxy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub replica: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub spec: BoxSpec,
    pub values: Vec<f64>,
    pub mode: SamplerMode,
    pub provenance: Option<Provenance>,
}

impl Field {
    pub fn new(spec: BoxSpec, values: Vec<f64>, mode: SamplerMode) -> Result<Self> {
        if values.len() != spec.vertex_count() {
            return Err(GffError::domain(format!(
                "field has {} values for a box of {} vertices",
                values.len(),
                spec.vertex_count()
            )));
        }
        Ok(Field { spec, values, mode, provenance: None })
    }

    pub fn value(&self, v: VertexId) -> f64 {
        self.values[v.0]
    }
}

enum Backend {
    /// `φ = L^{-T} z` with `L Lᵀ` the precision (generator) of the outer box.
    Precision { outer: BoxSpec, sys: KilledSystem },
    /// `φ = L z` with `L Lᵀ` the covariance; only the lower triangle is read.
    Covariance { l: Mat<f64> },
}

/// Reusable sampler for one box and mode. Immutable after construction.
pub struct FieldSampler {
    spec: BoxSpec,
    mode: SamplerMode,
    backend: Backend,
}

impl FieldSampler {
    pub fn new(spec: &BoxSpec, mode: SamplerMode) -> Result<Self> {
        let backend = match mode {
            SamplerMode::Dirichlet => precision_backend(*spec)?,
            SamplerMode::DirichletProxy { kappa } => {
                if !(kappa >= 1.0) || !kappa.is_finite() {
                    return Err(GffError::config("kappa", format!("must be a finite number >= 1, got {kappa}")));
                }
                let r = (kappa * spec.radius() as f64).ceil() as usize;
                precision_backend(BoxSpec::new(spec.dim(), r)?)?
            }
            SamplerMode::InfiniteRestricted => covariance_backend(spec)?,
        };
        Ok(FieldSampler { spec: *spec, mode, backend })
    }

    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    /// Number of standard normals consumed per sample.
    pub fn normals_per_sample(&self) -> usize {
        match &self.backend {
            Backend::Precision { sys, .. } => sys.killed().iter().filter(|&&k| !k).count(),
            Backend::Covariance { l } => l.nrows(),
        }
    }

    pub fn sample(&self, rng: &mut ReplicaRng) -> Field {
        self.sample_batch(std::slice::from_mut(rng)).pop().expect("one sample")
    }

    /// One field per rng, each drawing its normals from its own stream.
    ///
    /// In covariance mode the batch is multiplied as one matrix product, so a
    /// fixed grouping of replicas gives bit-identical results.
    pub fn sample_batch(&self, rngs: &mut [ReplicaRng]) -> Vec<Field> {
        match &self.backend {
            Backend::Precision { outer, sys } => rngs
                .iter_mut()
                .map(|rng| {
                    let mut z = vec![0.0; outer.vertex_count()];
                    for (zi, &k) in z.iter_mut().zip(sys.killed()) {
                        if !k {
                            *zi = rng.sample(StandardNormal);
                        }
                    }
                    sys.factor().solve_upper_in_place(&mut z);
                    let values = if outer == &self.spec {
                        z
                    } else {
                        self.spec.ids().map(|v| z[outer.embed(&self.spec, v).0]).collect()
                    };
                    self.wrap(values)
                })
                .collect(),
            Backend::Covariance { l } => {
                let n = l.nrows();
                let k = rngs.len();
                let mut z = Mat::<f64>::zeros(n, k);
                for (j, rng) in rngs.iter_mut().enumerate() {
                    for i in 0..n {
                        z[(i, j)] = rng.sample(StandardNormal);
                    }
                }
                let mut out = Mat::<f64>::zeros(n, k);
                matmul(
                    out.as_mut(),
                    BlockStructure::Rectangular,
                    Accum::Replace,
                    l.as_ref(),
                    BlockStructure::TriangularLower,
                    z.as_ref(),
                    BlockStructure::Rectangular,
                    1.0,
                    Par::Seq,
                );
                (0..k).map(|j| self.wrap(out.col(j).iter().copied().collect())).collect()
            }
        }
    }

    fn wrap(&self, values: Vec<f64>) -> Field {
        Field { spec: self.spec, values, mode: self.mode, provenance: None }
    }
}

fn precision_backend(outer: BoxSpec) -> Result<Backend> {
    let bytes =
        outer.vertex_count().checked_mul(outer.stride(0) + 1).and_then(|x| x.checked_mul(8)).unwrap_or(usize::MAX);
    if bytes > MAX_BAND_BYTES {
        return Err(GffError::Capacity(format!(
            "precision factor for d={} r={} needs {} MiB of band storage",
            outer.dim(),
            outer.radius(),
            bytes >> 20
        )));
    }
    let sys = KilledSystem::dirichlet(&outer, &[])?;
    Ok(Backend::Precision { outer, sys })
}

fn covariance_backend(spec: &BoxSpec) -> Result<Backend> {
    if spec.dim() < 3 {
        return Err(GffError::domain("infinite-volume field needs d >= 3"));
    }
    if spec.radius() > MAX_DENSE_RADIUS {
        return Err(GffError::Capacity(format!(
            "dense infinite-volume sampling is limited to radius {MAX_DENSE_RADIUS}, got {}",
            spec.radius()
        )));
    }
    let table = InfiniteGreenTable::shared(spec.dim(), 2 * spec.radius())?;
    let n = spec.vertex_count();
    let coords: Vec<Vec<i64>> = spec.box_vertices();
    let mut diff = vec![0i64; spec.dim()];
    let mut c = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            for (k, dk) in diff.iter_mut().enumerate() {
                *dk = coords[i][k] - coords[j][k];
            }
            c[(i, j)] = table.get(&diff);
        }
    }
    let mut buf = MemBuffer::new(cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default()));
    cholesky_in_place(c.as_mut(), LltRegularization::default(), Par::Seq, MemStack::new(&mut buf), Default::default())
        .map_err(|e| {
            GffError::Numeric(format!(
                "covariance factorization failed ({e:?}); the Green table is not positive definite at this tolerance"
            ))
        })?;
    Ok(Backend::Covariance { l: c })
}

/// One exact sample; builds a sampler, so prefer [`FieldSampler`] for many.
pub fn sample_field(spec: &BoxSpec, mode: SamplerMode, rng: &mut ReplicaRng) -> Result<Field> {
    Ok(FieldSampler::new(spec, mode)?.sample(rng))
}

/// Probability that the bridge between endpoint values `a` and `b` stays at or
/// above `h` along a whole edge.
pub fn edge_open_prob(a: f64, b: f64, h: f64, d: usize) -> f64 {
    if !(a > h && b > h) {
        return 0.0;
    }
    -(-(a - h) * (b - h) / d as f64).exp_m1()
}

/// One uniform per edge slot; slots without an edge hold 1.0 and never open.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeUniforms {
    pub values: Vec<f64>,
}

impl BridgeUniforms {
    /// Draws the edges in slot order.
    pub fn draw(spec: &BoxSpec, rng: &mut ReplicaRng) -> Self {
        let mut values = vec![1.0; spec.edge_slot_count()];
        for (slot, _, _) in spec.edges() {
            values[slot] = rng.random::<f64>();
        }
        BridgeUniforms { values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricLevelSet {
    pub spec: BoxSpec,
    pub h: f64,
    /// `φ_v >= h`
    pub vertex: Vec<bool>,
    /// Open state per edge slot.
    pub open: Vec<bool>,
}

impl MetricLevelSet {
    /// Level set at `h` coupled through fixed uniforms: raising `h` can only
    /// close edges.
    pub fn from_uniforms(field: &Field, h: f64, uniforms: &BridgeUniforms) -> Self {
        let spec = field.spec;
        let d = spec.dim();
        let vertex: Vec<bool> = field.values.iter().map(|&x| x >= h).collect();
        let mut open = vec![false; spec.edge_slot_count()];
        for (slot, u, v) in spec.edges() {
            open[slot] = uniforms.values[slot] < edge_open_prob(field.values[u.0], field.values[v.0], h, d);
        }
        MetricLevelSet { spec, h, vertex, open }
    }

    /// Builds directly from masks; `open` is indexed by edge slot.
    pub fn from_masks(spec: BoxSpec, h: f64, vertex: Vec<bool>, open: Vec<bool>) -> Result<Self> {
        if vertex.len() != spec.vertex_count() || open.len() != spec.edge_slot_count() {
            return Err(GffError::domain("mask lengths do not match the box"));
        }
        for (slot, u, v) in spec.edges() {
            if open[slot] && !(vertex[u.0] && vertex[v.0]) {
                return Err(GffError::domain(format!("edge {slot} is open with an endpoint below level")));
            }
        }
        Ok(MetricLevelSet { spec, h, vertex, open })
    }

    pub fn open_edge_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// Neighbors reachable from `v` through one open edge.
    pub fn open_neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.spec.incident_edges(v).filter(|&(slot, _)| self.open[slot]).map(|(_, u)| u)
    }
}

/// Per-slot open probabilities of a field at level `h` (zero for missing edges).
pub fn edge_open_probabilities(field: &Field, h: f64) -> Vec<f64> {
    let spec = field.spec;
    let mut p = vec![0.0; spec.edge_slot_count()];
    for (slot, u, v) in spec.edges() {
        p[slot] = edge_open_prob(field.values[u.0], field.values[v.0], h, spec.dim());
    }
    p
}

/// Thresholds the field at `h` and opens each edge independently.
pub fn sample_level_set(field: &Field, h: f64, rng: &mut ReplicaRng) -> MetricLevelSet {
    let uniforms = BridgeUniforms::draw(&field.spec, rng);
    MetricLevelSet::from_uniforms(field, h, &uniforms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    #[test]
    fn open_prob_examples() {
        assert_eq!(edge_open_prob(0.3, 2.0, 0.3, 2), 0.0);
        let s = 2f64.sqrt();
        assert!((edge_open_prob(s, s, 0.0, 2) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert_eq!(edge_open_prob(-1.0, 2.0, 0.0, 3), 0.0);
    }

    #[test]
    fn dirichlet_field_vanishes_on_boundary() {
        let spec = BoxSpec::new(2, 4).unwrap();
        let f = sample_field(&spec, SamplerMode::Dirichlet, &mut replica_rng(1, 0)).unwrap();
        for b in spec.internal_boundary() {
            assert_eq!(f.value(b), 0.0);
        }
        assert!(f.value(spec.origin()) != 0.0);
    }

    #[test]
    fn capacity_limits() {
        let spec = BoxSpec::new(3, 11).unwrap();
        assert!(matches!(FieldSampler::new(&spec, SamplerMode::InfiniteRestricted), Err(GffError::Capacity(_))));
        let spec2 = BoxSpec::new(2, 3).unwrap();
        assert!(matches!(FieldSampler::new(&spec2, SamplerMode::InfiniteRestricted), Err(GffError::Domain(_))));
    }
}
