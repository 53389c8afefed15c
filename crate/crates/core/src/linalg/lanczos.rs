//! Hermitian Lanczos with full reorthogonalization for a few extreme
//! eigenpairs of an operator available only through products.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::scalar::{from_usize, lit, to_f64};
use crate::{Error, Real, Result};

/// Stopping rule: Ritz residual `|β_m y_m| ≤ tol · θ_1`.
#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub max_dim: usize,
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { max_dim: 400, tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct RitzPair<T> {
    pub value: T,
    pub vector: Vec<Complex<T>>,
    pub residual: T,
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

fn start_vector<T: Real>(n: usize, salt: usize) -> Vec<Complex<T>> {
    (0..n)
        .map(|i| {
            let t = from_usize::<T>(i + 1) + from_usize::<T>(salt) * lit(0.37);
            Complex::new(T::one() + lit::<T>(0.5) * (t * lit(1.3)).sin(), lit::<T>(0.25) * (t * lit(0.7)).cos())
        })
        .collect()
}

fn orthogonalize<T: Real>(w: &mut [Complex<T>], basis: &[Vec<Complex<T>>]) {
    for _ in 0..2 {
        for u in basis {
            let c = dot(u, w);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= *ui * c;
            }
        }
    }
}

/// The `k` largest eigenpairs of the Hermitian positive semidefinite
/// operator `apply` on `ℂⁿ`, descending.
pub fn top_eigenpairs<T: Real>(
    n: usize,
    k: usize,
    apply: impl Fn(&[Complex<T>]) -> Vec<Complex<T>>,
    opts: LanczosOptions,
) -> Result<Vec<RitzPair<T>>> {
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    let max_dim = opts.max_dim.min(n).max(k);
    let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(max_dim);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v = start_vector::<T>(n, 0);
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut restarts = 0usize;
    loop {
        let mut w = apply(&v);
        let a = dot(&v, &w).re;
        basis.push(v);
        orthogonalize(&mut w, &basis);
        alpha.push(to_f64(a));
        let b = norm(&w);
        let m = basis.len();
        let check = m == max_dim || m.is_multiple_of(5) || to_f64(b) == 0.0 || m >= n;
        if check && m >= k {
            let mut tm = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                tm[(i, i)] = alpha[i];
                if i + 1 < m {
                    tm[(i, i + 1)] = beta[i];
                    tm[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(tm);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[y].partial_cmp(&eig.eigenvalues[x]).expect("finite Ritz values"));
            let scale = eig.eigenvalues[order[0]].abs().max(f64::MIN_POSITIVE);
            let bf = to_f64(b);
            let residuals: Vec<f64> = order[..k].iter().map(|&j| (bf * eig.eigenvectors[(m - 1, j)]).abs()).collect();
            let converged = residuals.iter().all(|&r| r <= opts.tol * scale);
            if converged || m == max_dim || m >= n {
                if !converged && m < n {
                    return Err(Error::Solver {
                        iterations: m,
                        detail: format!(
                            "Lanczos residual {:e} above {:e} after {m} steps",
                            residuals.iter().cloned().fold(0.0, f64::max),
                            opts.tol * scale
                        ),
                    });
                }
                return Ok(order[..k]
                    .iter()
                    .zip(&residuals)
                    .map(|(&j, &res)| {
                        let mut x = vec![Complex::new(T::zero(), T::zero()); n];
                        for (i, q) in basis.iter().enumerate() {
                            let yi: T = lit(eig.eigenvectors[(i, j)]);
                            for (xv, qv) in x.iter_mut().zip(q) {
                                *xv += *qv * yi;
                            }
                        }
                        let nx = norm(&x);
                        x.iter_mut().for_each(|z| *z /= nx);
                        RitzPair { value: lit(eig.eigenvalues[j]), vector: x, residual: lit(res) }
                    })
                    .collect());
            }
        }
        if to_f64(b) <= 1e-13 * alpha.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(f64::MIN_POSITIVE) {
            // invariant subspace: continue with a fresh orthogonal direction
            restarts += 1;
            let mut fresh = start_vector::<T>(n, restarts);
            orthogonalize(&mut fresh, &basis);
            let nf = norm(&fresh);
            if to_f64(nf) == 0.0 {
                return Err(Error::Solver { iterations: basis.len(), detail: "Lanczos restart failed".into() });
            }
            fresh.iter_mut().for_each(|z| *z /= nf);
            beta.push(0.0);
            v = fresh;
        } else {
            beta.push(to_f64(b));
            v = w.into_iter().map(|z| z / b).collect();
        }
    }
}
