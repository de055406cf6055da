//! Row-major dense matrices and sparse row matrices used as feature inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data length",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row length",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matrix row length",
                expected: self.cols,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

/// One sparse row: strictly increasing column indices with their values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; cols];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn squared_distance(&self, other: &SparseRow) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.nnz() || b < other.nnz() {
            let ia = self.indices.get(a).copied().unwrap_or(u32::MAX);
            let ib = other.indices.get(b).copied().unwrap_or(u32::MAX);
            let d = if ia == ib {
                let d = self.values[a] - other.values[b];
                a += 1;
                b += 1;
                d
            } else if ia < ib {
                a += 1;
                self.values[a - 1]
            } else {
                b += 1;
                other.values[b - 1]
            };
            acc += d * d;
        }
        acc
    }

    /// `self + u * (other - self)` over the union of supports.
    pub fn interpolate(&self, other: &SparseRow, u: f64) -> SparseRow {
        let mut out = SparseRow::default();
        let (mut a, mut b) = (0, 0);
        while a < self.nnz() || b < other.nnz() {
            let ia = self.indices.get(a).copied().unwrap_or(u32::MAX);
            let ib = other.indices.get(b).copied().unwrap_or(u32::MAX);
            let (idx, x, y) = if ia == ib {
                a += 1;
                b += 1;
                (ia, self.values[a - 1], other.values[b - 1])
            } else if ia < ib {
                a += 1;
                (ia, self.values[a - 1], 0.0)
            } else {
                b += 1;
                (ib, 0.0, other.values[b - 1])
            };
            let v = x + u * (y - x);
            if v != 0.0 {
                out.indices.push(idx);
                out.values.push(v);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub cols: usize,
    pub rows: Vec<SparseRow>,
}

impl SparseMatrix {
    pub fn new(cols: usize, rows: Vec<SparseRow>) -> Self {
        SparseMatrix { cols, rows }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows.len(), self.cols);
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r.iter() {
                m.row_mut(i)[j] = v;
            }
        }
        m
    }

    pub fn select_rows(&self, indices: &[usize]) -> SparseMatrix {
        SparseMatrix {
            cols: self.cols,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Read access to feature rows, shared by dense and sparse inputs.
pub trait FeatureRows: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn row_dot(&self, i: usize, w: &[f64]) -> f64;
    /// `out += alpha * row(i)`
    fn row_axpy(&self, i: usize, alpha: f64, out: &mut [f64]);
}

impl FeatureRows for Matrix {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).iter().zip(w).map(|(a, b)| a * b).sum()
    }
    fn row_axpy(&self, i: usize, alpha: f64, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(self.row(i)) {
            *o += alpha * x;
        }
    }
}

impl FeatureRows for SparseMatrix {
    fn nrows(&self) -> usize {
        self.rows.len()
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        self.rows[i].dot(w)
    }
    fn row_axpy(&self, i: usize, alpha: f64, out: &mut [f64]) {
        for (j, v) in self.rows[i].iter() {
            out[j] += alpha * v;
        }
    }
}
