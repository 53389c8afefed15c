use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::{lit, to_f64};
use crate::{Error, Real, Result};

/// Row-major dense complex matrix.
///
/// Factorizations delegate to `nalgebra` in `f64`; results are converted
/// back to `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parameter("ragged rows".into()));
        }
        Ok(DenseMatrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn from_diagonal(d: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn matvec_adjoint(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols];
        for (i, &xi) in x.iter().enumerate().take(self.rows) {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn mul(&self, other: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if self.cols != other.rows {
            return Err(Error::Parameter(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> DenseMatrix<T> {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn norm_frobenius(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex<f64>> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| {
            let z = self[(i, j)];
            Complex::new(to_f64(z.re), to_f64(z.im))
        })
    }

    pub fn from_nalgebra(m: &DMatrix<Complex<f64>>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| Complex::new(lit(m[(i, j)].re), lit(m[(i, j)].im)))
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Parameter(format!("matrix is {}x{}, not square", self.rows, self.cols)))
        }
    }

    /// All eigenvalues via a complex Schur decomposition, unsorted.
    pub fn eigenvalues(&self) -> Result<Vec<Complex<T>>> {
        self.require_square()?;
        if self.rows == 0 {
            return Ok(Vec::new());
        }
        let max_iter = 200 * self.rows.max(10);
        let schur = nalgebra::Schur::try_new(self.to_nalgebra(), f64::EPSILON, max_iter)
            .ok_or_else(|| Error::Solver { iterations: max_iter, detail: "complex Schur did not converge".into() })?;
        let (_, t) = schur.unpack();
        Ok((0..self.rows).map(|i| Complex::new(lit(t[(i, i)].re), lit(t[(i, i)].im))).collect())
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Result<Vec<T>> {
        if self.rows == 0 || self.cols == 0 {
            return Ok(Vec::new());
        }
        let max_iter = 200 * self.rows.max(self.cols).max(10);
        let svd = nalgebra::SVD::try_new(self.to_nalgebra(), false, false, f64::EPSILON, max_iter)
            .ok_or_else(|| Error::Solver { iterations: max_iter, detail: "SVD did not converge".into() })?;
        let mut s: Vec<T> = svd.singular_values.iter().map(|&v| lit(v)).collect();
        s.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
        Ok(s)
    }

    /// Singular values with left/right singular vectors; `(s, U, V)` with
    /// `A = U diag(s) V*`, `s` descending.
    pub fn svd(&self) -> Result<(Vec<T>, DenseMatrix<T>, DenseMatrix<T>)> {
        let max_iter = 200 * self.rows.max(self.cols).max(10);
        let svd = nalgebra::SVD::try_new(self.to_nalgebra(), true, true, f64::EPSILON, max_iter)
            .ok_or_else(|| Error::Solver { iterations: max_iter, detail: "SVD did not converge".into() })?;
        let u = svd.u.as_ref().expect("requested U");
        let vt = svd.v_t.as_ref().expect("requested V*");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).expect("finite"));
        let s = order.iter().map(|&k| lit(svd.singular_values[k])).collect();
        let uu = Self::from_fn(u.nrows(), order.len(), |i, j| {
            let z = u[(i, order[j])];
            Complex::new(lit(z.re), lit(z.im))
        });
        let vv = Self::from_fn(vt.ncols(), order.len(), |i, j| {
            let z = vt[(order[j], i)].conj();
            Complex::new(lit(z.re), lit(z.im))
        });
        Ok((s, uu, vv))
    }

    /// Eigenvalues of the Hermitian part-assumed matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<T>> {
        self.require_square()?;
        let m = self.to_nalgebra();
        let herm = (&m + m.adjoint()) * Complex::new(0.5, 0.0);
        let mut ev: Vec<T> = herm.symmetric_eigenvalues().iter().map(|&v| lit(v)).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        Ok(ev)
    }

    pub fn determinant(&self) -> Result<Complex<T>> {
        self.require_square()?;
        let d = self.to_nalgebra().determinant();
        Ok(Complex::new(lit(d.re), lit(d.im)))
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}
