//! Real symmetric band matrices and their reduction to tridiagonal form by
//! Givens bulge chasing.

use crate::{Real, Result};

use super::ql::real_symmetric_eigenvalues;

/// Symmetric matrix with lower half-bandwidth `bandwidth`, stored by
/// diagonals with one spare diagonal for the bulge.
#[derive(Clone, Debug)]
pub struct SymmetricBand<T> {
    n: usize,
    bandwidth: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> SymmetricBand<T> {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let width = bandwidth + 1;
        SymmetricBand { n, bandwidth, width, data: vec![T::zero(); n * (width + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.width {
            T::zero()
        } else {
            self.data[i * (self.width + 1) + k]
        }
    }

    /// Sets `a[i][j] = a[j][i]`; entries beyond the storage are dropped.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k <= self.width {
            self.data[i * (self.width + 1) + k] = v;
        }
    }

    /// Rotates rows/columns `p < q` so that `a[q][col]` becomes zero.
    fn annihilate(&mut self, p: usize, q: usize, col: usize) {
        let x = self.get(p, col);
        let y = self.get(q, col);
        if y == T::zero() {
            return;
        }
        let r = x.hypot(y);
        let c = x / r;
        let s = y / r;
        let lo = p.saturating_sub(self.width);
        let hi = (q + self.width).min(self.n - 1);
        for m in lo..=hi {
            if m == p || m == q {
                continue;
            }
            let apm = self.get(p, m);
            let aqm = self.get(q, m);
            if apm == T::zero() && aqm == T::zero() {
                continue;
            }
            self.set(p, m, c * apm + s * aqm);
            self.set(q, m, c * aqm - s * apm);
        }
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(p, q);
        let cs = c * s;
        self.set(p, p, c * c * app + (cs + cs) * apq + s * s * aqq);
        self.set(q, q, s * s * app - (cs + cs) * apq + c * c * aqq);
        self.set(p, q, cs * (aqq - app) + (c * c - s * s) * apq);
        self.set(p, col, r);
        self.set(q, col, T::zero());
    }

    /// Orthogonally similar tridiagonal matrix `(diag, off)`.
    pub fn tridiagonalize(mut self) -> (Vec<T>, Vec<T>) {
        let n = self.n;
        for k in (2..=self.bandwidth).rev() {
            for j in 0..n {
                if j + k >= n {
                    break;
                }
                self.annihilate(j + k - 1, j + k, j);
                let mut p = j + k - 1;
                while p + k + 1 < n {
                    let row = p + k + 1;
                    self.annihilate(row - 1, row, p);
                    p = row - 1;
                }
            }
        }
        let diag = (0..n).map(|i| self.get(i, i)).collect();
        let off = (1..n).map(|i| self.get(i, i - 1)).collect();
        (diag, off)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(self) -> Result<Vec<T>> {
        let (d, e) = self.tridiagonalize();
        let mut ev = real_symmetric_eigenvalues(&d, &e)?;
        ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        Ok(ev)
    }
}
