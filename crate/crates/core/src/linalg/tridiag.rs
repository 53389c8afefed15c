use num_complex::Complex;

use super::DenseMatrix;
use crate::{Error, Real, Result};

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Complex tridiagonal matrix; `sub[i] = a[i+1][i]`, `sup[i] = a[i][i+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal<T> {
    pub sub: Vec<Complex<T>>,
    pub diag: Vec<Complex<T>>,
    pub sup: Vec<Complex<T>>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn new(sub: Vec<Complex<T>>, diag: Vec<Complex<T>>, sup: Vec<Complex<T>>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(Error::Parameter(format!(
                "tridiagonal bands of lengths {}, {}, {} are inconsistent",
                sub.len(),
                n,
                sup.len()
            )));
        }
        Ok(Tridiagonal { sub, diag, sup })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.sub[j]
        } else if j == i + 1 {
            self.sup[i]
        } else {
            zero()
        }
    }

    /// `A = Aᵀ` (complex symmetric, not Hermitian).
    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.sup[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// `A* x`.
    pub fn matvec_adjoint(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i].conj() * x[i];
                if i > 0 {
                    acc += self.sup[i - 1].conj() * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.sub[i].conj() * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// `A - λ I`.
    pub fn shifted(&self, lambda: Complex<T>) -> Self {
        let mut out = self.clone();
        for d in &mut out.diag {
            *d -= lambda;
        }
        out
    }

    /// Maximum column sum.
    pub fn norm_one(&self) -> T {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j].norm();
                if j > 0 {
                    s += self.sup[j - 1].norm();
                }
                if j + 1 < n {
                    s += self.sub[j].norm();
                }
                s
            })
            .fold(T::zero(), T::max)
    }

    /// Maximum row sum.
    pub fn norm_inf(&self) -> T {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].norm();
                if i > 0 {
                    s += self.sub[i - 1].norm();
                }
                if i + 1 < n {
                    s += self.sup[i].norm();
                }
                s
            })
            .fold(T::zero(), T::max)
    }

    pub fn norm_frobenius(&self) -> T {
        self.diag
            .iter()
            .chain(&self.sub)
            .chain(&self.sup)
            .map(|z| z.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.sub[i];
                m[(i, i + 1)] = self.sup[i];
            }
        }
        m
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<TridiagonalLu<T>> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut du = self.sup.clone();
        let mut dl = self.sub.clone();
        let mut du2 = vec![zero::<T>(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i].norm() == T::zero() {
                    return Err(Error::Degenerate(format!("tridiagonal matrix is singular at pivot {i}")));
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1].norm() == T::zero() {
            return Err(Error::Degenerate("tridiagonal matrix is singular at the last pivot".into()));
        }
        Ok(TridiagonalLu { d, du, du2, dl, swapped })
    }
}

/// Packed `PA = LU` factors of a [`Tridiagonal`] matrix.
#[derive(Clone, Debug)]
pub struct TridiagonalLu<T> {
    d: Vec<Complex<T>>,
    du: Vec<Complex<T>>,
    du2: Vec<Complex<T>>,
    dl: Vec<Complex<T>>,
    swapped: Vec<bool>,
}

impl<T: Real> TridiagonalLu<T> {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        let n = self.dim();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let bi = b[i];
                b[i + 1] -= self.dl[i] * bi;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    /// Solves `A* x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [Complex<T>]) {
        let n = self.dim();
        b[0] /= self.d[0].conj();
        if n > 1 {
            b[1] = (b[1] - self.du[0].conj() * b[0]) / self.d[1].conj();
        }
        for i in 2..n {
            b[i] = (b[i] - self.du[i - 1].conj() * b[i - 1] - self.du2[i - 2].conj() * b[i - 2]) / self.d[i].conj();
        }
        for i in (0..n - 1).rev() {
            if self.swapped[i] {
                let temp = b[i + 1];
                b[i + 1] = b[i] - self.dl[i].conj() * temp;
                b[i] = temp;
            } else {
                let next = b[i + 1];
                b[i] -= self.dl[i].conj() * next;
            }
        }
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_adjoint(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut x = b.to_vec();
        self.solve_adjoint_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tridiagonal(n: usize, rng: &mut ChaCha8Rng) -> Tridiagonal<f64> {
        let mut c = || Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let sub = (0..n - 1).map(|_| c()).collect();
        let diag = (0..n).map(|_| c()).collect();
        let sup = (0..n - 1).map(|_| c()).collect();
        Tridiagonal::new(sub, diag, sup).unwrap()
    }

    #[test]
    fn solves_match_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 5, 40] {
            let t = random_tridiagonal(n, &mut rng);
            let lu = t.lu().unwrap();
            let b: Vec<_> = (0..n).map(|i| Complex::new(i as f64, 1.0 - i as f64)).collect();
            let x = lu.solve(&b);
            let r = t.matvec(&x);
            let y = lu.solve_adjoint(&b);
            let s = t.matvec_adjoint(&y);
            for i in 0..n {
                assert!((r[i] - b[i]).norm() < 1e-9, "n={n}");
                assert!((s[i] - b[i]).norm() < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let one = Complex::new(1.0, 0.0);
        let z = Complex::new(0.0, 0.0);
        let t = Tridiagonal::new(vec![one, one], vec![z, z, one], vec![one, one]).unwrap();
        let lu = t.lu().unwrap();
        let b = vec![one, one + one, one];
        let x = lu.solve(&b);
        let r = t.matvec(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let one = Complex::new(1.0, 0.0);
        let t = Tridiagonal::new(vec![one], vec![one, one], vec![one]).unwrap();
        assert!(matches!(t.lu(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rejects_bad_band_lengths() {
        let one = Complex::new(1.0, 0.0);
        assert!(Tridiagonal::new(vec![one, one], vec![one, one], vec![one]).is_err());
    }
}
