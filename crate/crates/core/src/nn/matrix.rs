use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err("Matrix::from_vec", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(shape_err("Matrix::from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.data[r * self.cols + c])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    fn gemm(a: &Matrix, a_t: bool, b: &Matrix, b_t: bool, context: &'static str) -> Result<Matrix> {
        let (m, k) = if a_t {
            (a.cols, a.rows)
        } else {
            (a.rows, a.cols)
        };
        let (k2, n) = if b_t {
            (b.cols, b.rows)
        } else {
            (b.rows, b.cols)
        };
        if k != k2 {
            return Err(shape_err(context, format!("inner dim {k}"), k2));
        }
        let mut out = Matrix::zeros(m, n);
        if m == 0 || n == 0 {
            return Ok(out);
        }
        let (rsa, csa) = if a_t {
            (1, a.cols as isize)
        } else {
            (a.cols as isize, 1)
        };
        let (rsb, csb) = if b_t {
            (1, b.cols as isize)
        } else {
            (b.cols as isize, 1)
        };
        // SAFETY: strides and dimensions describe the backing buffers exactly.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                0.0,
                out.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Ok(out)
    }

    /// `self · other`
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        Self::gemm(self, false, other, false, "matmul")
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        Self::gemm(self, true, other, false, "t_matmul")
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        Self::gemm(self, false, other, true, "matmul_t")
    }

    pub fn add_row_vector(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for row in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (x, b) in row.iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        out
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.rows as f64;
        self.column_sums().into_iter().map(|s| s / n).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        self.check_same_shape(other, "zip_map")?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        for x in &mut self.data {
            *x *= k;
        }
    }

    pub fn scaled(&self, k: f64) -> Matrix {
        self.map(|x| x * k)
    }

    /// Multiplies row `r` by `factors[r]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Matrix {
        let mut out = self.clone();
        for (r, f) in factors.iter().enumerate() {
            for x in out.row_mut(r) {
                *x *= f;
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    pub fn col_range(&self, range: Range<usize>) -> Matrix {
        let cols: Vec<usize> = range.collect();
        self.select_cols(&cols)
    }

    /// Horizontal concatenation.
    pub fn hcat(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if let Some(bad) = parts.iter().find(|m| m.rows != rows) {
            return Err(shape_err("hcat rows", rows, bad.rows));
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(r));
            }
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Vertical concatenation.
    pub fn vcat(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        if let Some(bad) = parts.iter().find(|m| m.cols != cols) {
            return Err(shape_err("vcat cols", cols, bad.cols));
        }
        let mut data = Vec::new();
        for m in parts {
            data.extend_from_slice(&m.data);
        }
        Ok(Matrix {
            rows: data.len() / cols.max(1),
            cols,
            data,
        })
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn check_same_shape(&self, other: &Matrix, context: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_err(
                context,
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} contains non-finite values"
            )))
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}
