//! Implicit QL iteration with Wilkinson shifts for tridiagonal matrices that
//! are symmetric (`A = Aᵀ`), either complex or real.
//!
//! The complex variant uses complex orthogonal rotations (`c² + s² = 1`,
//! not unitary). They are unbounded in principle, so the largest rotation
//! entry is tracked and reported; callers treat large growth as breakdown.

use num_complex::Complex;

use crate::scalar::lit;
use crate::{Error, Real, Result};

const MAX_SWEEPS: usize = 90;

/// Eigenvalues plus the largest `|c|`, `|s|` seen across all rotations
/// (1 for the real case).
#[derive(Clone, Debug)]
pub struct QlOutcome<E, T> {
    pub eigenvalues: Vec<E>,
    pub rotation_growth: T,
}

fn chypot<T: Real>(f: Complex<T>, g: Complex<T>) -> Complex<T> {
    let scale = f.norm().max(g.norm());
    if scale == T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    let fs = f / scale;
    let gs = g / scale;
    (fs * fs + gs * gs).sqrt() * scale
}

fn off_negligible<T: Real>(e: T, d_sum: T, anorm: T) -> bool {
    e <= T::epsilon() * d_sum || e <= T::min_positive_value().sqrt() * anorm.max(T::one()) * T::epsilon()
}

/// Eigenvalues of the complex symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off`.
pub fn complex_symmetric_eigenvalues<T: Real>(
    diag: &[Complex<T>],
    off: &[Complex<T>],
) -> Result<QlOutcome<Complex<T>, T>> {
    let n = diag.len();
    if off.len() + 1 != n.max(1) {
        return Err(Error::Parameter("off-diagonal length must be n - 1".into()));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(Complex::new(T::zero(), T::zero()));
    let anorm = (0..n).map(|i| d[i].norm() + e[i].norm()).fold(T::zero(), T::max);
    let one = Complex::new(T::one(), T::zero());
    let two: T = lit(2.0);
    let mut growth = T::one();
    let mut total_iter = 0usize;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                if off_negligible(e[m].norm(), d[m].norm() + d[m + 1].norm(), anorm) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            total_iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::Solver {
                    iterations: total_iter,
                    detail: format!("QL did not deflate eigenvalue {l} of {n}"),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (e[l] * two);
            let mut r = chypot(g, one);
            let denom = if (g + r).norm() >= (g - r).norm() { g + r } else { g - r };
            // exceptional shift to break rare cycles
            let shift_fix = if iter.is_multiple_of(30) { e[l] * lit::<T>(0.75) } else { Complex::new(T::zero(), T::zero()) };
            g = d[m] - d[l] + e[l] / denom + shift_fix;
            let mut s = one;
            let mut c = one;
            let mut p = Complex::new(T::zero(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = chypot(f, g);
                e[i + 1] = r;
                if r.norm() == T::zero() {
                    if f.norm() + g.norm() > T::zero() {
                        return Err(Error::Solver {
                            iterations: total_iter,
                            detail: "complex rotation broke down (f² + g² = 0)".into(),
                        });
                    }
                    d[i + 1] -= p;
                    e[m] = Complex::new(T::zero(), T::zero());
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                growth = growth.max(s.norm()).max(c.norm());
                g = d[i + 1] - p;
                r = (d[i] - g) * s + c * b * two;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = Complex::new(T::zero(), T::zero());
        }
    }
    if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Solver { iterations: total_iter, detail: "QL produced non-finite values".into() });
    }
    Ok(QlOutcome { eigenvalues: d, rotation_growth: growth })
}

/// Eigenvalues of the real symmetric tridiagonal matrix `(diag, off)`,
/// unsorted.
pub fn real_symmetric_eigenvalues<T: Real>(diag: &[T], off: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if off.len() + 1 != n.max(1) {
        return Err(Error::Parameter("off-diagonal length must be n - 1".into()));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(T::zero());
    let anorm = (0..n).map(|i| d[i].abs() + e[i].abs()).fold(T::zero(), T::max);
    let two: T = lit(2.0);
    let mut total_iter = 0usize;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                if off_negligible(e[m].abs(), d[m].abs() + d[m + 1].abs(), anorm) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            total_iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::Solver {
                    iterations: total_iter,
                    detail: format!("QL did not deflate eigenvalue {l} of {n}"),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(d)
}
