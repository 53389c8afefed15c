//! Linear-algebra kernels used by the spectral experiments.
//!
//! Operator matrices are tridiagonal and complex symmetric, so eigenvalues
//! come from an `O(N²)` QL iteration and singular values from the real
//! symmetric embedding `[[Re A, Im A], [Im A, -Re A]]` (eigenvalues `±s_i`),
//! reduced to tridiagonal form by band Givens chasing. Dense matrices go to
//! `nalgebra`.

mod band;
mod dense;
mod lanczos;
mod ql;
mod tridiag;

use num_complex::Complex;

use crate::scalar::{from_usize, lit, to_f64};
use crate::{Error, Real, Result};

pub use band::SymmetricBand;
pub use dense::DenseMatrix;
pub use lanczos::{top_eigenpairs, LanczosOptions, RitzPair};
pub use ql::{complex_symmetric_eigenvalues, real_symmetric_eigenvalues, QlOutcome};
pub use tridiag::{Tridiagonal, TridiagonalLu};

/// Largest size for which a QL breakdown falls back to a dense Schur solve.
pub const DENSE_FALLBACK_LIMIT: usize = 1024;

/// Rotation growth above which complex QL results are not trusted.
const GROWTH_LIMIT: f64 = 1e6;

/// Eigenvalues of a tridiagonal matrix and the relative backward-error
/// level they were accepted at.
#[derive(Clone, Debug)]
pub struct TridiagonalSpectrum<T> {
    pub eigenvalues: Vec<Complex<T>>,
    pub solver_tol: T,
}

/// Eigenvalues of `t`, unsorted.
///
/// Non-symmetric input is first made complex symmetric by the diagonal
/// similarity with off-diagonals `√(sub·sup)`. The result is checked
/// against the trace identities `Σλ = tr A` and `Σλ² = tr A²`.
pub fn tridiagonal_eigenvalues<T: Real>(t: &Tridiagonal<T>) -> Result<TridiagonalSpectrum<T>> {
    let n = t.dim();
    let off: Vec<Complex<T>> = if t.is_symmetric() {
        t.sub.clone()
    } else {
        t.sub.iter().zip(&t.sup).map(|(a, b)| (a * b).sqrt()).collect()
    };
    let eps = T::epsilon();
    let outcome = complex_symmetric_eigenvalues(&t.diag, &off);
    let (eigenvalues, growth) = match outcome {
        Ok(o) if to_f64(o.rotation_growth) <= GROWTH_LIMIT => (o.eigenvalues, o.rotation_growth),
        Ok(_) | Err(Error::Solver { .. }) if n <= DENSE_FALLBACK_LIMIT => (t.to_dense().eigenvalues()?, T::one()),
        Ok(o) => {
            return Err(Error::Solver {
                iterations: 0,
                detail: format!("complex QL rotation growth {} exceeds {GROWTH_LIMIT:e}", o.rotation_growth),
            })
        }
        Err(e) => return Err(e),
    };
    let scale = t.norm_one().max(t.norm_inf()).max(T::min_positive_value());
    let nn: T = from_usize(n.max(1));
    let trace: Complex<T> = t.diag.iter().copied().sum();
    let trace2: Complex<T> = t.diag.iter().map(|d| d * d).sum::<Complex<T>>()
        + t.sub.iter().zip(&t.sup).map(|(a, b)| a * b * lit::<T>(2.0)).sum::<Complex<T>>();
    let sum: Complex<T> = eigenvalues.iter().copied().sum();
    let sum2: Complex<T> = eigenvalues.iter().map(|z| z * z).sum();
    let e1 = (sum - trace).norm() / (nn * scale);
    let e2 = (sum2 - trace2).norm() / (nn * scale * scale);
    let solver_tol = e1.max(e2).max(eps * nn.sqrt() * growth);
    if solver_tol > lit(1e-8) {
        return Err(Error::Solver {
            iterations: 0,
            detail: format!("trace identities violated at relative level {solver_tol}"),
        });
    }
    Ok(TridiagonalSpectrum { eigenvalues, solver_tol })
}

/// Singular values of a complex symmetric tridiagonal matrix, descending.
pub fn symmetric_tridiagonal_singular_values<T: Real>(t: &Tridiagonal<T>) -> Result<Vec<T>> {
    if !t.is_symmetric() {
        return Err(Error::Parameter("singular values via the real embedding need sub == sup".into()));
    }
    let n = t.dim();
    let complex_off = t.sub.iter().any(|z| z.im != T::zero());
    let bandwidth = if complex_off { 3 } else { 2 };
    let mut band = SymmetricBand::zeros(2 * n, bandwidth);
    // interleaved ordering (Re-part index 2i, Im-part index 2i+1)
    for i in 0..n {
        let x = t.diag[i].re;
        let y = t.diag[i].im;
        band.set(2 * i, 2 * i, x);
        band.set(2 * i + 1, 2 * i + 1, -x);
        band.set(2 * i + 1, 2 * i, y);
        if i + 1 < n {
            let x = t.sub[i].re;
            let y = t.sub[i].im;
            band.set(2 * i + 2, 2 * i, x);
            band.set(2 * i + 3, 2 * i + 1, -x);
            band.set(2 * i + 2, 2 * i + 1, y);
            band.set(2 * i + 3, 2 * i, y);
        }
    }
    let ev = band.eigenvalues()?;
    Ok(ev.iter().rev().take(n).map(|&v| v.max(T::zero())).collect())
}

/// Determinant of a small square matrix given by rows: cofactor expansion
/// up to 4×4, partial-pivoting elimination beyond.
pub fn small_determinant<T: Real>(rows: &[Vec<Complex<T>>]) -> Complex<T> {
    let n = rows.len();
    let z = Complex::new(T::zero(), T::zero());
    match n {
        0 => Complex::new(T::one(), T::zero()),
        1 => rows[0][0],
        2 => rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0],
        3 | 4 => {
            let mut acc = z;
            for j in 0..n {
                let minor: Vec<Vec<Complex<T>>> = rows[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &v)| v).collect())
                    .collect();
                let term = rows[0][j] * small_determinant(&minor);
                if j % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
        _ => {
            let mut a: Vec<Vec<Complex<T>>> = rows.to_vec();
            let mut det = Complex::new(T::one(), T::zero());
            for k in 0..n {
                let p = (k..n)
                    .max_by(|&i, &j| a[i][k].norm().partial_cmp(&a[j][k].norm()).expect("finite entries"))
                    .expect("nonempty range");
                if a[p][k].norm() == T::zero() {
                    return z;
                }
                if p != k {
                    a.swap(p, k);
                    det = -det;
                }
                det *= a[k][k];
                let (top, rest) = a.split_at_mut(k + 1);
                let pivot = &top[k];
                for row in rest.iter_mut() {
                    let f = row[k] / pivot[k];
                    for (x, &p) in row[k..].iter_mut().zip(&pivot[k..]) {
                        *x -= f * p;
                    }
                }
            }
            det
        }
    }
}
