//! On-disk cache of Dirichlet Green tables.
//!
//! A file holds one JSON header line followed by little-endian `f64` values:
//! the free-vertex inverse (dense) or the band of the Cholesky factor (banded).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{GreenMode, GreenTable, KilledSystem};
use crate::error::{GffError, Result};
use crate::green::BandedCholesky;
use crate::lattice::BoxSpec;

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Header {
    version: u32,
    d: usize,
    r: usize,
    mode: GreenMode,
    rows: usize,
    cols: usize,
}

pub fn cache_path(dir: &Path, d: usize, r: usize, mode: GreenMode) -> PathBuf {
    let tag = match mode {
        GreenMode::Dense => "dense",
        _ => "banded",
    };
    dir.join(format!("green_d{d}_r{r}_{tag}.bin"))
}

/// Writes a Dirichlet table (killed exactly on `∂V`).
pub fn save(table: &GreenTable, path: &Path) -> Result<()> {
    let spec = table.spec();
    if table.killed().iter().enumerate().any(|(i, &k)| k != spec.is_boundary(crate::lattice::VertexId(i))) {
        return Err(GffError::domain("only Dirichlet tables can be cached"));
    }
    let (mode, rows, cols, data): (GreenMode, usize, usize, Vec<f64>) = match table.dense_parts() {
        Some((_, g)) => {
            let mut data = Vec::with_capacity(g.nrows() * g.ncols());
            for j in 0..g.ncols() {
                data.extend(g.col(j).iter().copied());
            }
            (GreenMode::Dense, g.nrows(), g.ncols(), data)
        }
        None => {
            let f = table.system().expect("banded table").factor();
            (GreenMode::Banded, f.dim(), f.bandwidth() + 1, f.as_slice().to_vec())
        }
    };
    let header = Header { version: CACHE_VERSION, d: spec.dim(), r: spec.radius(), mode, rows, cols };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GreenTable> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())?;
    if header.version != CACHE_VERSION {
        return Err(GffError::Numeric(format!("cache version {} does not match {CACHE_VERSION}", header.version)));
    }
    let spec = BoxSpec::new(header.d, header.r)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.rows * header.cols * 8 {
        return Err(GffError::Numeric("cache payload is truncated".into()));
    }
    let data: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let killed: Vec<bool> = spec.ids().map(|v| spec.is_boundary(v)).collect();
    match header.mode {
        GreenMode::Dense => {
            let g = Mat::from_fn(header.rows, header.cols, |i, j| data[j * header.rows + i]);
            GreenTable::from_dense(&spec, killed, g)
        }
        _ => {
            let chol = BandedCholesky::from_raw(header.rows, header.cols - 1, data)?;
            Ok(GreenTable::from_system(KilledSystem::from_parts(spec, killed, chol)?))
        }
    }
}

/// Loads the table from `dir` if present, otherwise builds and stores it.
pub fn load_or_build(dir: &Path, spec: &BoxSpec, mode: GreenMode) -> Result<GreenTable> {
    let free = spec.ids().filter(|&v| !spec.is_boundary(v)).count();
    let path = cache_path(dir, spec.dim(), spec.radius(), mode.resolve(spec.dim(), free));
    if path.exists() {
        match load(&path) {
            Ok(t) => return Ok(t),
            Err(e) => log::warn!("ignoring unreadable cache {}: {e}", path.display()),
        }
    }
    let table = super::green_dirichlet_with(spec, mode)?;
    save(&table, &path)?;
    Ok(table)
}
