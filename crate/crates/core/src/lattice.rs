//! Origin-centered boxes `V_r = [-r, r]^d ∩ Z^d` with dense row-major vertex indexing.
//!
//! A vertex with coordinates `(x_0, .., x_{d-1})` has index
//! `Σ_i (x_i + r) · side^(d-1-i)` where `side = 2r + 1`, so the last axis is
//! contiguous and the bandwidth of any nearest-neighbor operator is
//! `side^(d-1)`.

use crate::error::{GffError, Result};

pub type Coord = Vec<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub usize);

/// An undirected lattice edge, stored with the lower index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId {
    lo: VertexId,
    hi: VertexId,
}

impl EdgeId {
    /// Builds the edge between two adjacent vertices of `spec`.
    pub fn new(spec: &BoxSpec, a: VertexId, b: VertexId) -> Result<Self> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let axis = (0..spec.dim())
            .find(|&axis| hi.0 - lo.0 == spec.stride(axis))
            .ok_or_else(|| GffError::domain(format!("{a:?} and {b:?} are not adjacent")))?;
        let step = spec.axis_coord(lo, axis);
        if hi.0 >= spec.vertex_count() || step >= spec.radius() as i64 {
            return Err(GffError::domain(format!("{a:?} and {b:?} are not adjacent")));
        }
        Ok(EdgeId { lo, hi })
    }

    pub fn lo(&self) -> VertexId {
        self.lo
    }

    pub fn hi(&self) -> VertexId {
        self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoxSpec {
    dim: usize,
    radius: usize,
    side: usize,
    count: usize,
}

impl BoxSpec {
    pub fn new(dim: usize, radius: usize) -> Result<Self> {
        if dim < 2 {
            return Err(GffError::domain(format!("dimension must be >= 2, got {dim}")));
        }
        if radius < 1 {
            return Err(GffError::domain("box radius must be >= 1"));
        }
        let side = radius
            .checked_mul(2)
            .and_then(|s| s.checked_add(1))
            .ok_or_else(|| GffError::Capacity(format!("radius {radius} overflows")))?;
        let count = u32::try_from(dim)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .and_then(|c| c.checked_mul(dim).map(|_| c))
            .ok_or_else(|| GffError::Capacity(format!("box with d={dim}, r={radius} has too many vertices")))?;
        Ok(BoxSpec { dim, radius, side, count })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Number of lattice points per axis, `2r + 1`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn vertex_count(&self) -> usize {
        self.count
    }

    /// Index offset between neighbors along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    pub fn origin(&self) -> VertexId {
        VertexId((self.count - 1) / 2)
    }

    pub fn contains(&self, coord: &[i64]) -> bool {
        coord.len() == self.dim && coord.iter().all(|c| c.unsigned_abs() as usize <= self.radius)
    }

    pub fn index_of(&self, coord: &[i64]) -> Option<VertexId> {
        if !self.contains(coord) {
            return None;
        }
        let r = self.radius as i64;
        let idx = coord.iter().fold(0usize, |acc, &c| acc * self.side + (c + r) as usize);
        Some(VertexId(idx))
    }

    pub fn coord_of(&self, v: VertexId) -> Coord {
        let mut out = vec![0; self.dim];
        self.write_coord(v, &mut out);
        out
    }

    pub fn write_coord(&self, v: VertexId, out: &mut [i64]) {
        let r = self.radius as i64;
        let mut rest = v.0;
        for slot in out.iter_mut().rev() {
            *slot = (rest % self.side) as i64 - r;
            rest /= self.side;
        }
    }

    /// Coordinate of `v` along one axis.
    pub fn axis_coord(&self, v: VertexId, axis: usize) -> i64 {
        ((v.0 / self.stride(axis)) % self.side) as i64 - self.radius as i64
    }

    /// Sup norm `|v|_∞`.
    pub fn linf(&self, v: VertexId) -> usize {
        (0..self.dim).map(|axis| self.axis_coord(v, axis).unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn l1(&self, v: VertexId) -> usize {
        (0..self.dim).map(|axis| self.axis_coord(v, axis).unsigned_abs() as usize).sum()
    }

    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.linf(v) == self.radius
    }

    /// All coordinates of the box in index order.
    pub fn box_vertices(&self) -> Vec<Coord> {
        (0..self.count).map(|i| self.coord_of(VertexId(i))).collect()
    }

    /// `∂V_r`: vertices with a lattice neighbor outside the box.
    pub fn internal_boundary(&self) -> Vec<VertexId> {
        self.sphere(self.radius)
    }

    /// Vertices with `|v|_∞ <= rho`.
    pub fn ball(&self, rho: usize) -> Vec<VertexId> {
        self.ids().filter(|&v| self.linf(v) <= rho).collect()
    }

    /// Vertices with `|v|_∞ == rho`, i.e. `∂V_rho` seen from inside this box.
    pub fn sphere(&self, rho: usize) -> Vec<VertexId> {
        self.ids().filter(|&v| self.linf(v) == rho).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.count).map(VertexId)
    }

    pub fn neighbors(&self, coord: &[i64]) -> Result<Vec<Coord>> {
        let v = self.index_of(coord).ok_or_else(|| GffError::domain(format!("{coord:?} lies outside the box")))?;
        Ok(self.neighbor_ids(v).map(|u| self.coord_of(u)).collect())
    }

    /// Lattice neighbors of `v` inside the box.
    pub fn neighbor_ids(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        let r = self.radius as i64;
        (0..self.dim).flat_map(move |axis| {
            let c = self.axis_coord(v, axis);
            let s = self.stride(axis);
            let down = (c > -r).then(|| VertexId(v.0 - s));
            let up = (c < r).then(|| VertexId(v.0 + s));
            down.into_iter().chain(up)
        })
    }

    pub fn degree(&self, v: VertexId) -> usize {
        let r = self.radius as i64;
        (0..self.dim)
            .map(|axis| {
                let c = self.axis_coord(v, axis);
                usize::from(c > -r) + usize::from(c < r)
            })
            .sum()
    }

    /// Size of the per-edge slot array: slot `v·d + axis` holds the edge from
    /// `v` to `v + e_axis` when that neighbor exists.
    pub fn edge_slot_count(&self) -> usize {
        self.count * self.dim
    }

    pub fn edge_slot(&self, edge: EdgeId) -> usize {
        let diff = edge.hi.0 - edge.lo.0;
        let axis = (0..self.dim).find(|&a| self.stride(a) == diff).expect("edge endpoints differ by one stride");
        edge.lo.0 * self.dim + axis
    }

    /// Every edge of the box as `(slot, lo, hi)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, VertexId, VertexId)> + '_ {
        let r = self.radius as i64;
        self.ids().flat_map(move |v| {
            (0..self.dim).filter_map(move |axis| {
                (self.axis_coord(v, axis) < r).then(|| (v.0 * self.dim + axis, v, VertexId(v.0 + self.stride(axis))))
            })
        })
    }

    /// Edges incident to `v` as `(slot, other endpoint)`.
    pub fn incident_edges(&self, v: VertexId) -> impl Iterator<Item = (usize, VertexId)> + '_ {
        let r = self.radius as i64;
        (0..self.dim).flat_map(move |axis| {
            let c = self.axis_coord(v, axis);
            let s = self.stride(axis);
            let down = (c > -r).then(|| ((v.0 - s) * self.dim + axis, VertexId(v.0 - s)));
            let up = (c < r).then(|| (v.0 * self.dim + axis, VertexId(v.0 + s)));
            down.into_iter().chain(up)
        })
    }

    /// Maps a vertex of `inner` (a smaller concentric box) to this box.
    pub fn embed(&self, inner: &BoxSpec, v: VertexId) -> VertexId {
        debug_assert!(inner.radius <= self.radius && inner.dim == self.dim);
        let shift = (self.radius - inner.radius) as i64;
        let mut idx = 0usize;
        for axis in 0..self.dim {
            let c = inner.axis_coord(v, axis) + inner.radius as i64 + shift;
            idx = idx * self.side + c as usize;
        }
        VertexId(idx)
    }

    /// Mask of length `vertex_count` with `true` at the listed vertices.
    pub fn mask(&self, set: &[VertexId]) -> Vec<bool> {
        let mut mask = vec![false; self.count];
        for v in set {
            mask[v.0] = true;
        }
        mask
    }
}
