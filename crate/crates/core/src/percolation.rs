//! Clusters, connection events and chemical distances of a metric level set.
//!
//! Distances count open edges (hops). Two vertices are connected when a path
//! of open edges joins them; a vertex is at distance zero from itself even
//! when it lies below the level.

use std::collections::VecDeque;

use crate::error::{GffError, Result};
use crate::lattice::{BoxSpec, VertexId};
use crate::sampler::{edge_open_prob, BridgeUniforms, Field, MetricLevelSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    /// Cluster id per vertex, `None` below the level. Ids follow the order of
    /// each cluster's lowest vertex index.
    pub labels: Vec<Option<u32>>,
    pub sizes: Vec<usize>,
}

impl ClusterLabels {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn same_cluster(&self, u: VertexId, v: VertexId) -> bool {
        matches!((self.labels[u.0], self.labels[v.0]), (Some(a), Some(b)) if a == b)
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Connected components of the open subgraph restricted to above-level vertices.
pub fn label_clusters(ls: &MetricLevelSet) -> ClusterLabels {
    let n = ls.spec.vertex_count();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    for (slot, u, v) in ls.spec.edges() {
        if ls.open[slot] {
            let (a, b) = (find(&mut parent, u.0 as u32), find(&mut parent, v.0 as u32));
            if a != b {
                // keep the smaller index as root so labels are order independent
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi as usize] = lo;
            }
        }
    }
    let mut root_label = vec![u32::MAX; n];
    let mut labels = vec![None; n];
    let mut sizes = Vec::new();
    for v in 0..n {
        if !ls.vertex[v] {
            continue;
        }
        let r = find(&mut parent, v as u32) as usize;
        if root_label[r] == u32::MAX {
            root_label[r] = sizes.len() as u32;
            sizes.push(0);
        }
        labels[v] = Some(root_label[r]);
        sizes[root_label[r] as usize] += 1;
    }
    ClusterLabels { labels, sizes }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChemicalDistance {
    /// Hop count, `None` when the sets are not connected.
    pub distance: Option<usize>,
    /// A shortest path from the first set to the second, when requested.
    pub path: Option<Vec<VertexId>>,
}

impl ChemicalDistance {
    pub fn is_finite(&self) -> bool {
        self.distance.is_some()
    }

    /// Distance as a float, `+∞` when disconnected.
    pub fn as_f64(&self) -> f64 {
        self.distance.map_or(f64::INFINITY, |d| d as f64)
    }
}

fn check_set(spec: &BoxSpec, set: &[VertexId], name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(GffError::domain(format!("{name} must be nonempty")));
    }
    if let Some(v) = set.iter().find(|v| v.0 >= spec.vertex_count()) {
        return Err(GffError::domain(format!("{v:?} lies outside the box")));
    }
    Ok(())
}

/// Breadth-first search over open edges from the above-level part of
/// `sources`, stopping at the first vertex accepted by `stop`.
/// Returns the stopping vertex, its distance and the parent array.
fn bfs<F: FnMut(VertexId, usize) -> bool>(
    ls: &MetricLevelSet,
    sources: &[VertexId],
    mut stop: F,
) -> (Option<(VertexId, usize)>, Vec<usize>, Vec<u32>) {
    let n = ls.spec.vertex_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for &s in sources {
        if ls.vertex[s.0] && dist[s.0] == usize::MAX {
            dist[s.0] = 0;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        if stop(v, dist[v.0]) {
            return (Some((v, dist[v.0])), dist, parent);
        }
        for u in ls.open_neighbors(v) {
            if dist[u.0] == usize::MAX {
                dist[u.0] = dist[v.0] + 1;
                parent[u.0] = v.0 as u32;
                queue.push_back(u);
            }
        }
    }
    (None, dist, parent)
}

/// Hop distances from `sources ∩ level set` to every vertex (`usize::MAX`
/// when unreachable).
pub fn distances_from(ls: &MetricLevelSet, sources: &[VertexId]) -> Vec<usize> {
    bfs(ls, sources, |_, _| false).1
}

/// Whether some above-level vertex of `a` is connected to some above-level
/// vertex of `b`.
pub fn connects(ls: &MetricLevelSet, a: &[VertexId], b: &[VertexId]) -> Result<bool> {
    check_set(&ls.spec, a, "source set")?;
    check_set(&ls.spec, b, "target set")?;
    let target = ls.spec.mask(b);
    Ok(bfs(ls, a, |v, _| target[v.0]).0.is_some())
}

/// `min_{u ∈ A, v ∈ B} D_h(u, v)` with `D_h(u, u) = 0`.
pub fn chemical_distance(
    ls: &MetricLevelSet,
    a: &[VertexId],
    b: &[VertexId],
    with_path: bool,
) -> Result<ChemicalDistance> {
    check_set(&ls.spec, a, "source set")?;
    check_set(&ls.spec, b, "target set")?;
    let target = ls.spec.mask(b);
    if let Some(&u) = a.iter().find(|u| target[u.0]) {
        return Ok(ChemicalDistance { distance: Some(0), path: with_path.then(|| vec![u]) });
    }
    let (hit, _, parent) = bfs(ls, a, |v, _| target[v.0]);
    Ok(match hit {
        None => ChemicalDistance { distance: None, path: None },
        Some((v, d)) => ChemicalDistance {
            distance: Some(d),
            path: with_path.then(|| {
                let mut path = vec![v];
                let mut cur = v;
                while parent[cur.0] != u32::MAX {
                    cur = VertexId(parent[cur.0] as usize);
                    path.push(cur);
                }
                path.reverse();
                path
            }),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingFractions {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CrossingFractions {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(0.0 < alpha && alpha < beta && beta < gamma && gamma < 1.0) {
            return Err(GffError::config(
                "alpha",
                format!("fractions must satisfy 0 < alpha < beta < gamma < 1, got {alpha}, {beta}, {gamma}"),
            ));
        }
        Ok(CrossingFractions { alpha, beta, gamma })
    }

    /// `(⌊αN⌋, ⌊βN⌋, ⌊γN⌋)`, which must be strictly increasing.
    pub fn radii(&self, n: usize) -> Result<(usize, usize, usize)> {
        let r = |f: f64| (f * n as f64).floor() as usize;
        let (a, b, g) = (r(self.alpha), r(self.beta), r(self.gamma));
        if !(a < b && b < g) {
            return Err(GffError::config("N", format!("N = {n} too small to separate the crossing radii")));
        }
        Ok((a, b, g))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossingOutcome {
    /// `V_{αN}` connected to `∂V_{γN}`.
    pub crosses: bool,
    /// Hop distance from `V_{αN}` to `∂V_{βN}`.
    pub distance: Option<usize>,
}

/// Crossing event and chemical distance for the box of radius `n` centered in
/// the level set's box.
pub fn crossing_event(ls: &MetricLevelSet, fr: &CrossingFractions, n: usize) -> Result<CrossingOutcome> {
    if n > ls.spec.radius() {
        return Err(GffError::config("N", format!("N = {n} exceeds the box radius {}", ls.spec.radius())));
    }
    let (ra, rb, rg) = fr.radii(n)?;
    let spec = &ls.spec;
    let inner = spec.ball(ra);
    // any path from V_{αN} to ∂V_{γN} passes ∂V_{βN} first, and vertices
    // leave the queue in order of distance
    let mut distance = None;
    let (hit, _, _) = bfs(ls, &inner, |v, d| {
        let r = spec.linf(v);
        if r == rb && distance.is_none() {
            distance = Some(d);
        }
        r == rg
    });
    Ok(CrossingOutcome { crosses: hit.is_some(), distance })
}

/// Whether the origin is connected to `∂V_N` at level `h`, evaluating edge
/// states on demand from coupled uniforms.
pub fn origin_reaches_boundary(field: &Field, uniforms: &BridgeUniforms, h: f64, scratch: &mut Vec<u32>) -> bool {
    let spec = &field.spec;
    let phi = &field.values;
    let d = spec.dim();
    let o = spec.origin();
    if phi[o.0] < h {
        return false;
    }
    // scratch holds a visit stamp per vertex; bump the stamp instead of clearing
    if scratch.len() != spec.vertex_count() + 1 {
        scratch.clear();
        scratch.resize(spec.vertex_count() + 1, 0);
    }
    let stamp_slot = spec.vertex_count();
    scratch[stamp_slot] = scratch[stamp_slot].wrapping_add(1);
    if scratch[stamp_slot] == 0 {
        scratch.iter_mut().for_each(|x| *x = 0);
        scratch[stamp_slot] = 1;
    }
    let stamp = scratch[stamp_slot];
    let mut stack = vec![o];
    scratch[o.0] = stamp;
    while let Some(v) = stack.pop() {
        if spec.is_boundary(v) {
            return true;
        }
        for (slot, u) in spec.incident_edges(v) {
            if scratch[u.0] != stamp && uniforms.values[slot] < edge_open_prob(phi[v.0], phi[u.0], h, d) {
                scratch[u.0] = stamp;
                stack.push(u);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r: usize, vertex: impl Fn(VertexId) -> bool, open: impl Fn(VertexId, VertexId) -> bool) -> MetricLevelSet {
        let spec = BoxSpec::new(2, r).unwrap();
        let vm: Vec<bool> = spec.ids().map(&vertex).collect();
        let mut om = vec![false; spec.edge_slot_count()];
        for (slot, u, v) in spec.edges() {
            om[slot] = vm[u.0] && vm[v.0] && open(u, v);
        }
        MetricLevelSet::from_masks(spec, 0.0, vm, om).unwrap()
    }

    #[test]
    fn no_open_edges_gives_singletons() {
        let ls = grid(2, |_| true, |_, _| false);
        let cl = label_clusters(&ls);
        assert_eq!(cl.count(), 25);
        assert!(cl.sizes.iter().all(|&s| s == 1));
    }

    #[test]
    fn fully_open_grid_is_one_cluster() {
        let ls = grid(3, |_| true, |_, _| true);
        assert_eq!(label_clusters(&ls).sizes, vec![49]);
    }

    #[test]
    fn distance_conventions() {
        let ls = grid(2, |_| false, |_, _| false);
        let o = ls.spec.origin();
        let d = chemical_distance(&ls, &[o], &[o], true).unwrap();
        assert_eq!(d.distance, Some(0));
        assert!(!connects(&ls, &[o], &ls.spec.internal_boundary()).unwrap());
        assert!(chemical_distance(&ls, &[], &[o], false).is_err());
    }

    #[test]
    fn straight_path() {
        let spec = BoxSpec::new(2, 4).unwrap();
        let on_axis = |v: VertexId| spec.axis_coord(v, 0) == 0;
        let ls = grid(4, on_axis, |_, _| true);
        let a = spec.index_of(&[0, -4]).unwrap();
        let b = spec.index_of(&[0, 3]).unwrap();
        let d = chemical_distance(&ls, &[a], &[b], true).unwrap();
        assert_eq!(d.distance, Some(7));
        assert_eq!(d.path.unwrap().len(), 8);
    }

    #[test]
    fn crossing_fractions_validated() {
        assert!(CrossingFractions::new(0.5, 0.25, 0.75).is_err());
        assert!(CrossingFractions::new(0.25, 0.5, 1.0).is_err());
    }
}
