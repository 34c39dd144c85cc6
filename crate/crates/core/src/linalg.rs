//! Small dense matrix type used by the affine/quadratic components.

use nalgebra::DMatrix;

use crate::error::{check_dim, Result, VrviError};
use crate::point::Point;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(VrviError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(VrviError::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim(c, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_row_major(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert!(self.rows == other.rows && self.cols == other.cols);
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, f: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * f).collect(),
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_nalgebra(&(self.to_nalgebra() * other.to_nalgebra()))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        self.to_nalgebra()
            .singular_values()
            .iter()
            .fold(0.0_f64, |m, s| m.max(*s))
    }

    /// Smallest eigenvalue of the symmetric part `(A + A^T)/2`.
    pub fn min_sym_eigenvalue(&self) -> f64 {
        let a = self.to_nalgebra();
        let sym = (&a + a.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    /// Solves `self * x = rhs` for square systems.
    pub fn solve(&self, rhs: &Point) -> Result<Point> {
        check_dim(self.rows, rhs.dim())?;
        if self.rows != self.cols {
            return Err(VrviError::InvalidArgument("solve requires a square matrix".into()));
        }
        let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
        let x = self
            .to_nalgebra()
            .lu()
            .solve(&b)
            .ok_or_else(|| VrviError::InvalidArgument("singular linear system".into()))?;
        Point::new(x.iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![3.0, 7.0, 11.0]);
        assert_eq!(m.matvec_t(&[1.0, 0.0, 1.0]), vec![6.0, 8.0]);
        assert_eq!(m.transpose().matvec(&[1.0, 0.0, 1.0]), vec![6.0, 8.0]);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let mut m = DenseMatrix::identity(3);
        m.set(1, 1, -4.0);
        assert!((m.spectral_norm() - 4.0).abs() < 1e-12);
        assert!((m.min_sym_eigenvalue() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn solve_small_system() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = m.solve(&Point::new(vec![3.0, 5.0]).unwrap()).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
