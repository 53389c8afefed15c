//! The purely imaginary step potential: `L_n(u) y = -y'' + i u r_n y` on
//! `[0, π]` with Dirichlet ends, its eigenvalue migration towards `j²`, the
//! resolvent restricted to the complement of the homogeneous solutions, and
//! the resulting witness functions.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{assemble, BoundaryForm, Grid, OperatorMatrix};
use crate::linalg::{top_eigenpairs, LanczosOptions};
use crate::potential::{Potential, PieceKind};
use crate::scalar::{from_usize, lit};
use crate::spectra::{self, top_singular_values, LinearOperator, Resolvent};
use crate::{Error, Real, Result};

pub use crate::potential::weak_convergence_check;

/// `2⁻¹²`, the lower bound required of the restricted resolvent norm.
pub const S_HAT_THRESHOLD: f64 = 1.0 / 4096.0;
/// `2¹³`, the residual bound required of witnesses.
pub const RESIDUAL_BOUND: f64 = 8192.0;

fn step_potential<T: Real>(n: u32, u: T) -> Result<Potential<T>> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    if !(u >= T::zero() && u.is_finite()) {
        return Err(Error::Parameter(format!("u must be finite and non-negative, got {u}")));
    }
    let kind = PieceKind::Step { amplitude: Complex::new(T::zero(), u), n, origin: T::zero(), length: T::PI() };
    Ok(Potential::single(kind, T::PI())?.with_label(format!("L_{n}({u})")))
}

/// Dirichlet discretization of `L_n(u)` on `N` interior nodes of `[0, π]`.
pub fn ln_matrix<T: Real>(n: u32, u: T, big_n: usize) -> Result<OperatorMatrix<T>> {
    let q = step_potential(n, u)?;
    assemble(&q, &Grid::new(T::PI(), big_n)?, &BoundaryForm::dirichlet())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow<T> {
    pub n: u32,
    pub j: usize,
    pub lambda: Complex<T>,
    /// `j²` of the nearest square.
    pub target: T,
    pub distance: T,
    /// Another of the `j_max` eigenvalues matched the same square.
    pub collision: bool,
}

/// For each `n`, the `j_max` smallest-modulus eigenvalues of `L_n(u)` with
/// their distance to the nearest `j²`.
pub fn eigen_convergence<T: Real>(u: T, n_list: &[u32], j_max: usize, big_n: usize) -> Result<Vec<ConvergenceRow<T>>> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("n_list must be increasing".into()));
    }
    if j_max == 0 || j_max > big_n {
        return Err(Error::Parameter(format!("j_max must lie in 1..={big_n}")));
    }
    let per_n = n_list
        .par_iter()
        .map(|&n| {
            let ev = spectra::eigenvalues(&ln_matrix(n, u, big_n)?)?.eigenvalues;
            let rows: Vec<ConvergenceRow<T>> = ev[..j_max]
                .iter()
                .map(|&lambda| {
                    let j = lambda.re.max(T::one()).sqrt().round().to_usize().unwrap_or(1).max(1);
                    let best = [j.saturating_sub(1).max(1), j, j + 1]
                        .into_iter()
                        .map(|jj| {
                            let t: T = from_usize(jj * jj);
                            (jj, t, (lambda - t).norm())
                        })
                        .min_by(|a, b| a.2.partial_cmp(&b.2).expect("finite distances"))
                        .expect("three candidates");
                    ConvergenceRow { n, j: best.0, lambda, target: best.1, distance: best.2, collision: false }
                })
                .collect();
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for mut rows in per_n {
        let squares: Vec<usize> = rows.iter().map(|r| r.j).collect();
        for r in rows.iter_mut() {
            r.collision = squares.iter().filter(|&&j| j == r.j).count() > 1;
        }
        out.extend(rows);
    }
    Ok(out)
}

/// Solutions of `-y'' - i u r_n y = 0` with `(y, y')(0) = (1, 0)` and
/// `(0, 1)` at the grid nodes `x_i = i π/(N+1)`, `i = 0..=N+1`.
///
/// Values at node `i` are stored divided by `exp(log_scale[i])`.
#[derive(Clone, Debug)]
pub struct HomogeneousSolutions<T> {
    pub x: Vec<T>,
    pub y1: Vec<Complex<T>>,
    pub dy1: Vec<Complex<T>>,
    pub y2: Vec<Complex<T>>,
    pub dy2: Vec<Complex<T>>,
    pub log_scale: Vec<T>,
}

impl<T: Real> HomogeneousSolutions<T> {
    /// `max_i |W(x_i) - 1|` for `W = y1 y2' - y1' y2` (unscaled).
    pub fn wronskian_deviation(&self) -> T {
        (0..self.x.len())
            .map(|i| {
                let w = self.y1[i] * self.dy2[i] - self.dy1[i] * self.y2[i];
                (w * (self.log_scale[i] + self.log_scale[i]).exp() - T::one()).norm()
            })
            .fold(T::zero(), T::max)
    }
}

/// `(cosh(ωs), sinh(ωs)/ω, ω sinh(ωs))` with `ω² = w2`.
fn propagator<T: Real>(w2: Complex<T>, s: T) -> (Complex<T>, Complex<T>, Complex<T>) {
    let omega = w2.sqrt();
    let z = omega * s;
    if z.norm() < lit(1e-4) {
        let z2 = z * z;
        let c = Complex::new(T::one(), T::zero()) + z2 / lit::<T>(2.0) + z2 * z2 / lit::<T>(24.0);
        let shc = (Complex::new(T::one(), T::zero()) + z2 / lit::<T>(6.0) + z2 * z2 / lit::<T>(120.0)) * s;
        (c, shc, w2 * shc)
    } else {
        let (ch, sh) = (z.cosh(), z.sinh());
        (ch, sh / omega, omega * sh)
    }
}

/// Closed-form propagation piece by piece (`y'' = ∓ i u y` on each step
/// of `r_n`), matched at the jumps.
pub fn homogeneous_solutions<T: Real>(n: u32, u: T, big_n: usize) -> Result<HomogeneousSolutions<T>> {
    let grid = Grid::new(T::PI(), big_n)?;
    step_potential(n, u)?;
    let nf: T = from_usize(n as usize);
    let width = T::PI() / nf;
    let w2_of = |piece: usize| {
        let sign = if piece.is_multiple_of(2) { T::one() } else { -T::one() };
        Complex::new(T::zero(), -u * sign)
    };
    let one = Complex::new(T::one(), T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    // state at the left end of the current piece: [y1, y1', y2, y2']
    let mut state = [one, zero, zero, one];
    let mut scale = T::zero();
    let mut piece = 0usize;
    let mut piece_start = T::zero();
    let total = big_n + 2;
    let mut out = HomogeneousSolutions {
        x: Vec::with_capacity(total),
        y1: Vec::with_capacity(total),
        dy1: Vec::with_capacity(total),
        y2: Vec::with_capacity(total),
        dy2: Vec::with_capacity(total),
        log_scale: Vec::with_capacity(total),
    };
    let advance = |st: &[Complex<T>; 4], w2: Complex<T>, s: T| {
        let (c, shc, wsh) = propagator(w2, s);
        [st[0] * c + st[1] * shc, st[0] * wsh + st[1] * c, st[2] * c + st[3] * shc, st[2] * wsh + st[3] * c]
    };
    for i in 0..total {
        let x = grid.node(i);
        while piece + 1 < n as usize && x >= width * from_usize(piece + 1) {
            let end = width * from_usize(piece + 1);
            state = advance(&state, w2_of(piece), end - piece_start);
            piece += 1;
            piece_start = end;
            let big = state.iter().map(|z| z.norm()).fold(T::zero(), T::max);
            if big > lit(1e100) {
                state.iter_mut().for_each(|z| *z /= big);
                scale += big.ln();
            }
        }
        let v = advance(&state, w2_of(piece), x - piece_start);
        out.x.push(x);
        out.y1.push(v[0]);
        out.dy1.push(v[1]);
        out.y2.push(v[2]);
        out.dy2.push(v[3]);
        out.log_scale.push(scale);
    }
    Ok(out)
}

/// Normalized witness on `[0, π]` (boundary nodes included).
#[derive(Clone, Debug, Serialize)]
pub struct WitnessFunction<T> {
    pub x: Vec<T>,
    pub y: Vec<Complex<T>>,
    /// `(h Σ |y_i|²)^{1/2}`.
    pub norm: T,
    /// `‖L_n(u) y‖` in the same norm.
    pub residual: T,
    /// `|y(0)|, |y'(0)|, |y(π)|, |y'(π)|` by one-sided differences.
    pub boundary_data: [T; 4],
    pub h: T,
}

impl<T: Real> WitnessFunction<T> {
    pub fn boundary_max(&self) -> T {
        self.boundary_data.iter().copied().fold(T::zero(), T::max)
    }

    /// `x,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,re,im\n");
        for (x, y) in self.x.iter().zip(&self.y) {
            out.push_str(&format!("{x},{},{}\n", y.re, y.im));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RestrictedResolvent<T> {
    pub n: u32,
    pub u: T,
    pub big_n: usize,
    /// `‖R P‖`, `P` the orthogonal projector off the homogeneous solutions.
    pub s_hat: T,
    /// `∏_{i≤3} |λ_i(R)|` for the three largest `|λ_i(R)|`.
    pub weyl_bound: T,
    /// `s_1, s_2, s_3` of `R`.
    pub top_singular: Vec<T>,
    /// Condition number of the Gram matrix of the two solutions.
    pub gram_condition: T,
    /// `‖f̂‖ / ‖R f̂‖` for the maximizing `f̂`.
    pub residual_identity_gap: T,
    #[serde(skip)]
    pub witness: WitnessFunction<T>,
}

struct ProjectedResolvent<'a, T> {
    resolvent: Resolvent<'a, T>,
    basis: [Vec<Complex<T>>; 2],
}

impl<T: Real> ProjectedResolvent<'_, T> {
    /// `x - Q Q* x` with `Q` orthonormal.
    fn project(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = x.to_vec();
        for _ in 0..2 {
            for q in &self.basis {
                let c: Complex<T> = q.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
                for (o, qi) in out.iter_mut().zip(q) {
                    *o -= *qi * c;
                }
            }
        }
        out
    }
}

impl<T: Real> LinearOperator<T> for ProjectedResolvent<'_, T> {
    fn dim(&self) -> usize {
        self.resolvent.dim()
    }
    fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.resolvent.solve(&self.project(x))
    }
    fn apply_adjoint(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.project(&self.resolvent.solve_adjoint(x))
    }
}

/// Solutions of the matrix's own homogeneous recurrence for
/// `-z'' - i u r_n z = 0`, started from `(z_0, z_1) = (1, 1)` and `(0, h)`.
///
/// They are the discrete adjoint solutions of the assembled matrix, so
/// `f ⊥ z` forces `y = R f` to satisfy `y_1 = y_N = 0` exactly.
fn discrete_adjoint_solutions<T: Real>(m: &OperatorMatrix<T>) -> [Vec<Complex<T>>; 2] {
    let t = m.tridiagonal();
    let n = m.dim();
    let h = m.grid().h();
    let h2 = h * h;
    let two: T = lit(2.0);
    let run = |z0: Complex<T>, z1: Complex<T>| {
        let mut z = Vec::with_capacity(n + 2);
        z.push(z0);
        z.push(z1);
        for i in 1..=n {
            let qbar = (t.diag[i - 1] - Complex::new(two / h2, T::zero())).conj();
            let next = z[i] * two - z[i - 1] + z[i] * qbar * h2;
            z.push(next);
        }
        z
    };
    let one = Complex::new(T::one(), T::zero());
    [run(one, one), run(Complex::new(T::zero(), T::zero()), Complex::new(h, T::zero()))]
}

/// Largest singular value of the inverse of `L_n(u)` restricted to the
/// orthogonal complement of the two homogeneous solutions, with the
/// maximizing witness.
pub fn restricted_resolvent<T: Real>(n: u32, u: T, big_n: usize) -> Result<RestrictedResolvent<T>> {
    let m = ln_matrix(n, u, big_n)?;
    let h = m.grid().h();
    let z = discrete_adjoint_solutions(&m);
    // interior nodes only, normalized
    let mut cols: Vec<Vec<Complex<T>>> = z
        .iter()
        .map(|zz| {
            let v = zz[1..=big_n].to_vec();
            let nv = v.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
            v.into_iter().map(|c| c / nv).collect()
        })
        .collect();
    let g01: Complex<T> = cols[0].iter().zip(&cols[1]).map(|(a, b)| a.conj() * b).sum();
    // Gram [[1, g], [ḡ, 1]] has eigenvalues 1 ± |g|
    let gram_condition = (T::one() + g01.norm()) / (T::one() - g01.norm()).max(T::min_positive_value());
    if gram_condition > lit(1e12) {
        return Err(Error::Degenerate(format!(
            "homogeneous solutions are numerically dependent (Gram condition {gram_condition})"
        )));
    }
    // Gram-Schmidt
    let c0 = cols[0].clone();
    for (b, a) in cols[1].iter_mut().zip(&c0) {
        *b -= *a * g01;
    }
    let nb = cols[1].iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
    cols[1].iter_mut().for_each(|c| *c /= nb);
    let basis = [cols[0].clone(), cols[1].clone()];
    let op = ProjectedResolvent { resolvent: Resolvent::inverse(&m)?, basis };
    let top = top_eigenpairs(big_n, 1, |x| op.apply_adjoint(&op.apply(x)), LanczosOptions::default())?;
    let s_hat = top[0].value.max(T::zero()).sqrt();
    let f_hat = op.project(&top[0].vector);
    let ry = op.resolvent.solve(&f_hat);
    let hnorm = |v: &[Complex<T>]| (h * v.iter().map(|c| c.norm_sqr()).sum::<T>()).sqrt();
    let f_norm = hnorm(&f_hat);
    let ry_norm = hnorm(&ry);
    let mut y = Vec::with_capacity(big_n + 2);
    y.push(Complex::new(T::zero(), T::zero()));
    y.extend(ry.iter().map(|c| c / ry_norm));
    y.push(Complex::new(T::zero(), T::zero()));
    let norm = hnorm(&y);
    let residual = hnorm(&m.matvec(&y[1..=big_n]));
    let boundary_data = [
        y[0].norm(),
        (y[1] - y[0]).norm() / h,
        y[big_n + 1].norm(),
        (y[big_n + 1] - y[big_n]).norm() / h,
    ];
    let x: Vec<T> = (0..big_n + 2).map(|i| m.grid().node(i)).collect();
    let mut small: Vec<T> = spectra::eigenvalues(&m)?.eigenvalues.iter().map(|z| z.norm()).collect();
    small.truncate(3);
    let weyl_bound = small.iter().fold(T::one(), |acc, &v| acc / v);
    let top_singular = top_singular_values(&op.resolvent, 3.min(big_n))?.into_iter().map(|t| t.value).collect();
    Ok(RestrictedResolvent {
        n,
        u,
        big_n,
        s_hat,
        weyl_bound,
        top_singular,
        gram_condition,
        residual_identity_gap: (residual - f_norm / ry_norm).abs(),
        witness: WitnessFunction { x, y, norm, residual, boundary_data, h },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Attempt<T> {
    pub n: u32,
    pub s_hat: T,
    pub residual: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockResult<T> {
    pub k: usize,
    pub u: T,
    /// Accepted `n_k`; `None` when the cap was reached.
    pub n_k: Option<u32>,
    pub s_hat: T,
    pub residual: T,
    pub boundary_max: T,
    pub attempts: Vec<Attempt<T>>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub witness: Option<WitnessFunction<T>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleResult<T> {
    pub big_n: usize,
    pub n_cap: u32,
    pub margin: T,
    pub s_hat_threshold: T,
    pub residual_bound: T,
    pub blocks: Vec<BlockResult<T>>,
}

impl<T: Real> ScheduleResult<T> {
    pub fn all_accepted(&self) -> bool {
        self.blocks.iter().all(|b| b.n_k.is_some())
    }

    /// The accepted `n_k`, if every block succeeded.
    pub fn schedule(&self) -> Option<Vec<u32>> {
        self.blocks.iter().map(|b| b.n_k).collect()
    }
}

/// For blocks `k = 1..K` (height `u = k`) doubles `n` from 2 until
/// `ŝ > 2⁻¹² (1 + margin)` with a witness of residual below `2¹³` and
/// boundary data within `10 h`. Blocks run in parallel.
pub fn select_schedule<T: Real>(big_k: usize, big_n: usize, n_cap: u32, margin: T) -> Result<ScheduleResult<T>> {
    if big_k == 0 {
        return Err(Error::Parameter("K must be at least 1".into()));
    }
    if n_cap < 2 || !n_cap.is_power_of_two() {
        return Err(Error::Parameter(format!("n_cap must be a power of two ≥ 2, got {n_cap}")));
    }
    if !(margin >= T::zero()) {
        return Err(Error::Parameter("margin must be non-negative".into()));
    }
    let threshold: T = lit::<T>(S_HAT_THRESHOLD) * (T::one() + margin);
    let bound: T = lit(RESIDUAL_BOUND);
    let blocks = (1..=big_k)
        .into_par_iter()
        .map(|k| {
            let u: T = from_usize(k);
            let mut attempts = Vec::new();
            let mut n = 2u32;
            let mut last: Option<RestrictedResolvent<T>> = None;
            while n <= n_cap {
                let rr = restricted_resolvent(n, u, big_n)?;
                attempts.push(Attempt { n, s_hat: rr.s_hat, residual: rr.witness.residual });
                let flat = rr.witness.boundary_max() <= rr.witness.h * lit(10.0);
                if rr.s_hat > threshold && rr.witness.residual < bound && flat {
                    return Ok(BlockResult {
                        k,
                        u,
                        n_k: Some(n),
                        s_hat: rr.s_hat,
                        residual: rr.witness.residual,
                        boundary_max: rr.witness.boundary_max(),
                        attempts,
                        failure: None,
                        witness: Some(rr.witness),
                    });
                }
                last = Some(rr);
                n *= 2;
            }
            let rr = last.expect("at least one attempt");
            Ok(BlockResult {
                k,
                u,
                n_k: None,
                s_hat: rr.s_hat,
                residual: rr.witness.residual,
                boundary_max: rr.witness.boundary_max(),
                attempts,
                failure: Some(format!("cap n = {n_cap} reached without ŝ > {threshold}")),
                witness: Some(rr.witness),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScheduleResult { big_n, n_cap, margin, s_hat_threshold: threshold, residual_bound: bound, blocks })
}
