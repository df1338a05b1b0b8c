//! Banded Cholesky factorization `A = L Lᵀ` for symmetric positive definite
//! matrices in natural lattice ordering.

use crate::error::{GffError, Result};

/// Lower factor stored row by row; row `i` holds columns `i - bw ..= i` at
/// offsets `0 ..= bw` (entries left of column 0 are zero padding).
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl BandedCholesky {
    /// Factors the `n × n` matrix whose lower band is written row by row by
    /// `fill(i, row)`: `row[bw - (i - j)]` receives `A[i][j]` for `i - bw <= j <= i`.
    /// `row` arrives zeroed.
    ///
    /// Rows flagged in `identity_rows` must be unit rows decoupled from the rest
    /// (Dirichlet vertices); they are skipped during elimination.
    pub fn factor<F>(n: usize, bw: usize, identity_rows: Option<&[bool]>, mut fill: F) -> Result<Self>
    where
        F: FnMut(usize, &mut [f64]),
    {
        let width = bw + 1;
        let len = n.checked_mul(width).ok_or_else(|| GffError::Capacity(format!("band of {n} x {width} overflows")))?;
        let mut rows = vec![0.0; len];
        // first structurally nonzero column of each row
        let mut first = vec![0usize; n];
        for i in 0..n {
            let row_start = i * width;
            if identity_rows.is_some_and(|m| m[i]) {
                rows[row_start + bw] = 1.0;
                first[i] = i;
                continue;
            }
            fill(i, &mut rows[row_start..row_start + width]);
            let lo = i.saturating_sub(bw);
            let mut f = i;
            for j in lo..i {
                if rows[row_start + bw - (i - j)] != 0.0 {
                    f = j;
                    break;
                }
            }
            // fill-in below the profile start never reaches left of `f`
            first[i] = f;
            for j in f..=i {
                if j < i && identity_rows.is_some_and(|m| m[j]) {
                    rows[row_start + bw - (i - j)] = 0.0;
                    continue;
                }
                let k0 = first[i].max(first[j]);
                let (head, tail) = rows.split_at_mut(row_start);
                let row_i = &mut tail[..width];
                let s = if j == i {
                    let a = &row_i[bw - (i - k0)..bw];
                    dot(a, a)
                } else if k0 < j {
                    let row_j = &head[j * width..(j + 1) * width];
                    let a = &row_i[bw - (i - k0)..bw - (i - j)];
                    let b = &row_j[bw - (j - k0)..bw];
                    dot(a, b)
                } else {
                    0.0
                };
                let pos = bw - (i - j);
                if j == i {
                    let d = row_i[pos] - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(GffError::Numeric(format!(
                            "matrix is not positive definite at row {i} (pivot {d:e})"
                        )));
                    }
                    row_i[pos] = d.sqrt();
                } else {
                    let ljj = head[j * width + bw];
                    row_i[pos] = (row_i[pos] - s) / ljj;
                }
            }
        }
        Ok(BandedCholesky { n, bw, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }

    pub fn from_raw(n: usize, bw: usize, rows: Vec<f64>) -> Result<Self> {
        if rows.len() != n * (bw + 1) {
            return Err(GffError::Numeric(format!(
                "band storage has {} entries, expected {}",
                rows.len(),
                n * (bw + 1)
            )));
        }
        Ok(BandedCholesky { n, bw, rows })
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let width = self.bw + 1;
        for i in 0..self.n {
            let row = &self.rows[i * width..(i + 1) * width];
            let lo = i.saturating_sub(self.bw);
            let s = dot(&row[self.bw - (i - lo)..self.bw], &b[lo..i]);
            b[i] = (b[i] - s) / row[self.bw];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        let width = self.bw + 1;
        for i in (0..self.n).rev() {
            let row = &self.rows[i * width..(i + 1) * width];
            let xi = y[i] / row[self.bw];
            y[i] = xi;
            if xi != 0.0 {
                let lo = i.saturating_sub(self.bw);
                for (yj, lij) in y[lo..i].iter_mut().zip(&row[self.bw - (i - lo)..self.bw]) {
                    *yj -= lij * xi;
                }
            }
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }
}
