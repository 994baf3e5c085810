//! Dense row-major `f64` matrices and the handful of kernels the network needs.
//!
//! Every product accumulates each output entry in ascending `k` order starting
//! from `0.0`, exactly like the textbook triple loop. The loop nest is arranged
//! so the innermost loop runs over contiguous memory (i-k-j), which lets the
//! compiler vectorize across output columns without changing any entry's
//! summation order. Results are therefore bit-identical to the naive reference.
//!
//! Column vectors (`cols == 1`) double as bias vectors, error signals and
//! single instances.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            f.debug_list()
                .entries((0..self.rows).map(|r| self.row(r)))
                .finish()
        } else {
            write!(f, "[..{} entries]", self.data.len())
        }
    }
}

impl Matrix {
    /// Wraps row-major `data`. Both dimensions must be positive.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged or empty input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data).expect("non-empty rows")
    }

    pub fn column(values: &[f64]) -> Self {
        Matrix::new(values.len(), 1, values.to_vec()).expect("non-empty column")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column_values(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// New matrix made of the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Matrix {
        assert!(!indices.is_empty(), "select_columns needs at least one index");
        let m = indices.len();
        let mut data = vec![0.0; self.rows * m];
        for r in 0..self.rows {
            let src = self.row(r);
            let dst = &mut data[r * m..(r + 1) * m];
            for (d, &i) in dst.iter_mut().zip(indices) {
                *d = src[i];
            }
        }
        Matrix {
            rows: self.rows,
            cols: m,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += s * other`, entry-wise.
    pub fn add_scaled_assign(&mut self, other: &Matrix, s: f64) -> Result<()> {
        same_shape("add_scaled_assign", self, other)?;
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += s * y;
        }
        Ok(())
    }

    /// Adds the `rows x 1` vector `column` to every column of `self`.
    pub fn add_column_assign(&mut self, column: &Matrix) -> Result<()> {
        if column.cols != 1 || column.rows != self.rows {
            return Err(Error::Shape {
                op: "add_column",
                left: self.shape(),
                right: column.shape(),
            });
        }
        for r in 0..self.rows {
            let b = column.data[r];
            for x in &mut self.data[r * self.cols..(r + 1) * self.cols] {
                *x += b;
            }
        }
        Ok(())
    }

    /// Mean of each row, as a `rows x 1` column. Summed left to right.
    pub fn row_means(&self) -> Matrix {
        let n = self.cols as f64;
        let data = (0..self.rows)
            .map(|r| self.row(r).iter().fold(0.0, |acc, &x| acc + x) / n)
            .collect();
        Matrix {
            rows: self.rows,
            cols: 1,
            data,
        }
    }
}

fn same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// `a * b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, m) = (a.rows, b.cols);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        for (k, &aik) in a.row(i).iter().enumerate() {
            let b_row = b.row(k);
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(Matrix {
        rows: n,
        cols: m,
        data: out,
    })
}

/// `aᵀ * b` without building `aᵀ`.
pub fn transpose_matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::Shape {
            op: "transpose_matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, m) = (a.cols, b.cols);
    let mut out = vec![0.0; n * m];
    for k in 0..a.rows {
        let a_row = a.row(k);
        let b_row = b.row(k);
        for (i, &aki) in a_row.iter().enumerate() {
            let out_row = &mut out[i * m..(i + 1) * m];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aki * bkj;
            }
        }
    }
    Ok(Matrix {
        rows: n,
        cols: m,
        data: out,
    })
}

/// `a * bᵀ`. Materializes `bᵀ` so the inner loop stays contiguous.
pub fn matmul_transpose(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::Shape {
            op: "matmul_transpose",
            left: a.shape(),
            right: b.shape(),
        });
    }
    matmul(a, &b.transpose())
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    zip_with("hadamard", a, b, |x, y| x * y)
}

pub fn add(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    zip_with("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    zip_with("sub", a, b, |x, y| x - y)
}

pub fn scale(a: &Matrix, s: f64) -> Matrix {
    a.map(|x| x * s)
}

fn zip_with(op: &'static str, a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
    same_shape(op, a, b)?;
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    })
}
