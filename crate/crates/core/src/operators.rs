//! Dense linear maps with exact accounting of applications of `K` and `K^T`.
//!
//! Complexity claims for the solvers are stated in number of multiplications
//! by `K` and by `K^T`, so every algorithmic product goes through an
//! [`InstrumentedMap`]. Diagnostics that must not perturb the counters use the
//! underlying [`DenseMatrix`] directly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Sub;
use std::path::Path;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must have at least one row and one column, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix entries",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite matrix entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged matrix rows".into()));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A x` without dimension checks beyond a debug assertion.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A^T y` without dimension checks beyond a debug assertion.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            if yi != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += a * yi;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matrix product inner dimension",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    for (o, b) in out.iter_mut().zip(other.row(l)) {
                        *o += a * b;
                    }
                }
            }
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    /// `W = A^T A`, assembled explicitly.
    pub fn gram(&self) -> DenseMatrix {
        let d = self.cols;
        let mut data = vec![0.0; d * d];
        for row in self.data.chunks_exact(d) {
            for (i, &ri) in row.iter().enumerate() {
                if ri != 0.0 {
                    let out = &mut data[i * d..(i + 1) * d];
                    for (o, rj) in out.iter_mut().zip(row) {
                        *o += ri * rj;
                    }
                }
            }
        }
        DenseMatrix {
            rows: d,
            cols: d,
            data,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Writes the matrix as a `p d` header line followed by one comma-separated
    /// line per row. Entries use the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.rows, self.cols)?;
        let mut line = String::new();
        for row in self.data.chunks_exact(self.cols) {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{v:?}").expect("writing to a String cannot fail");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> std::result::Result<Self, String> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or("empty matrix file")?
            .map_err(|e| e.to_string())?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| format!("bad header {header:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        let [rows, cols] = dims[..] else {
            return Err(format!("header must be \"p d\", got {header:?}"));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split(',') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|e| format!("row {}: bad entry {tok:?}: {e}", i + 1))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(format!("row {} has {} entries, expected {cols}", i + 1, data.len() - before));
            }
        }
        Self::from_row_major(rows, cols, data).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// Snapshot of the matrix-vector counters of an [`InstrumentedMap`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MatvecCounts {
    pub k: u64,
    pub kt: u64,
}

impl MatvecCounts {
    pub fn total(&self) -> u64 {
        self.k + self.kt
    }
}

impl Sub for MatvecCounts {
    type Output = MatvecCounts;

    fn sub(self, rhs: Self) -> Self::Output {
        MatvecCounts {
            k: self.k - rhs.k,
            kt: self.kt - rhs.kt,
        }
    }
}

/// The constraint matrix `K` together with counters for `K` and `K^T`
/// applications. One wrapper per solver run; the matrix itself is shared.
#[derive(Clone, Debug)]
pub struct InstrumentedMap {
    matrix: Arc<DenseMatrix>,
    counts: MatvecCounts,
}

impl InstrumentedMap {
    pub fn new(matrix: Arc<DenseMatrix>) -> Self {
        Self {
            matrix,
            counts: MatvecCounts::default(),
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn shared_matrix(&self) -> Arc<DenseMatrix> {
        Arc::clone(&self.matrix)
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols
    }

    /// `K x`
    pub fn apply(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("K input", self.matrix.cols, x)?;
        self.counts.k += 1;
        Ok(self.matrix.mul_vec(x))
    }

    /// `K^T y`
    pub fn apply_transpose(&mut self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("K^T input", self.matrix.rows, y)?;
        self.counts.kt += 1;
        Ok(self.matrix.tr_mul_vec(y))
    }

    /// `K^T (K x)`, one application of each.
    pub fn gram_apply(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let kx = self.apply(x)?;
        self.apply_transpose(&kx)
    }

    /// `K^T (K x - b)`, one application of each.
    pub fn normal_residual(&mut self, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        check_len("right-hand side", self.matrix.rows, b)?;
        let mut r = self.apply(x)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        self.apply_transpose(&r)
    }

    pub fn counter_snapshot(&self) -> MatvecCounts {
        self.counts
    }

    pub fn reset(&mut self) {
        self.counts = MatvecCounts::default();
    }
}
