//! Gaussian free fields on metric graphs of `Z^d`.

pub mod error;
pub mod exploration;
pub mod green;
pub mod harness;
pub mod lattice;
pub mod laws;
pub mod numerics;
pub mod percolation;
pub mod rng;
pub mod sampler;

pub use error::{GffError, Result};
pub use lattice::{BoxSpec, Coord, EdgeId, VertexId};
