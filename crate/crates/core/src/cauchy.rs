//! Order-`n` machinery on a window `[0, d]`: fundamental systems of
//! `l(y) = y⁽ⁿ⁾ + Σ_j p_j y⁽ⁿ⁻ʲ⁾` with `p_1 ≡ C₀`, the Cauchy (Volterra)
//! operator built from the determinant kernel, the boundary functionals whose
//! conjugates span the obstruction subspace, and the bump-function experiment
//! over a family of disjoint windows.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{small_determinant, DenseMatrix};
use crate::potential::{PieceKind, Potential, Weight};
use crate::scalar::{from_usize, lit};
use crate::{Error, Real, Result};

pub const MAX_ORDER: usize = 6;
pub const MIN_STEPS: usize = 64;

/// `C₀` and `p_2..p_n` of the differential expression. The potentials are
/// read at `offset + x`, so one set serves every window.
#[derive(Clone, Debug)]
pub struct CoefficientSet<T> {
    n: usize,
    c0: Complex<T>,
    p: Vec<Potential<T>>,
    offset: T,
}

impl<T: Real> CoefficientSet<T> {
    /// `p[j - 2]` is `p_j`.
    pub fn new(n: usize, c0: Complex<T>, p: Vec<Potential<T>>) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&n) {
            return Err(Error::Parameter(format!("order must lie in 2..={MAX_ORDER}, got {n}")));
        }
        if p.len() != n - 1 {
            return Err(Error::Parameter(format!("order {n} needs {} coefficients p_2..p_n, got {}", n - 1, p.len())));
        }
        if !(c0.re.is_finite() && c0.im.is_finite()) {
            return Err(Error::Parameter("C0 must be finite".into()));
        }
        Ok(Self { n, c0, p, offset: T::zero() })
    }

    /// Constant coefficients on `[0, domain_end)`.
    pub fn constant(n: usize, c0: Complex<T>, values: &[Complex<T>], domain_end: T) -> Result<Self> {
        let p = values
            .iter()
            .map(|&v| Potential::single(PieceKind::constant(v), domain_end))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, c0, p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c0(&self) -> Complex<T> {
        self.c0
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    /// `p_j`, `2 ≤ j ≤ n`.
    pub fn p(&self, j: usize) -> &Potential<T> {
        &self.p[j - 2]
    }

    /// The same coefficients seen from `a`: `p̃_j(x) = p_j(a + x)`.
    pub fn window(&self, a: T) -> Result<Self> {
        if !(a >= T::zero()) {
            return Err(Error::Parameter(format!("window start must be non-negative, got {a}")));
        }
        Ok(Self { offset: a, ..self.clone() })
    }

    fn domain_end(&self) -> T {
        self.p.iter().map(|q| q.domain_end()).fold(T::infinity(), T::min)
    }

    /// `p_2..p_n` at `offset + x`; left limits when `left` is set.
    fn eval(&self, x: T, left: bool) -> Result<Vec<Complex<T>>> {
        let t = self.offset + x;
        self.p
            .iter()
            .map(|q| if left || t >= q.domain_end() { q.eval_left(t) } else { q.eval(t) })
            .collect()
    }

    /// `C_1 = |C₀| d` and `C_j = ∫_a^{a+d} |p_j|` for the window at `a`.
    pub fn window_integrals(&self, a: T, d: T, tol: T) -> Result<Vec<T>> {
        let mut c = vec![self.c0.norm() * d];
        for q in &self.p {
            c.push(q.integrate_abs_power(a, a + d, Weight::One, tol)?);
        }
        Ok(c)
    }
}

/// `ψ_ν^{(l)}` on the uniform grid `x_i = i d / steps`, started from
/// `ψ_ν^{(l)}(0) = δ_{ν, l+1}`.
#[derive(Clone, Debug)]
pub struct FundamentalSystem<T> {
    n: usize,
    c0: Complex<T>,
    offset: T,
    x: Vec<T>,
    /// `psi[ν][l][i]`, 0-based `ν` and `l`.
    psi: Vec<Vec<Vec<Complex<T>>>>,
    wronskian: Vec<Complex<T>>,
}

impl<T: Real> FundamentalSystem<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c0(&self) -> Complex<T> {
        self.c0
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn d(&self) -> T {
        *self.x.last().expect("grid has at least two nodes")
    }

    pub fn h(&self) -> T {
        self.x[1] - self.x[0]
    }

    /// `ψ_{ν+1}^{(l)}` at the grid nodes.
    pub fn psi(&self, nu: usize, l: usize) -> &[Complex<T>] {
        &self.psi[nu][l]
    }

    pub fn wronskian(&self) -> &[Complex<T>] {
        &self.wronskian
    }

    /// `max_i |W(x_i) - e^{-x_i C₀}| / (1 + |e^{-x_i C₀}|)`.
    pub fn wronskian_deviation(&self) -> T {
        self.x
            .iter()
            .zip(&self.wronskian)
            .map(|(&x, &w)| {
                let e = (-self.c0 * x).exp();
                (w - e).norm() / (T::one() + e.norm())
            })
            .fold(T::zero(), T::max)
    }

    /// `max |ψ_ν^{(l)}|` over the grid, all `ν` and `l`.
    pub fn max_abs(&self) -> T {
        self.psi.iter().flatten().flatten().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Cofactors of the last row of the Wronski matrix at node `i` (rows
    /// `ψ, ψ', …, ψ^{(n-2)}`), divided by `W(x_i)`.
    fn kernel_factors(&self, i: usize) -> Vec<Complex<T>> {
        let n = self.n;
        let w = self.wronskian[i];
        (0..n)
            .map(|nu| {
                let minor: Vec<Vec<Complex<T>>> = (0..n - 1)
                    .map(|l| (0..n).filter(|&c| c != nu).map(|c| self.psi[c][l][i]).collect())
                    .collect();
                let sign = if (n - 1 + nu).is_multiple_of(2) { T::one() } else { -T::one() };
                small_determinant(&minor) * sign / w
            })
            .collect()
    }
}

/// Integrates the first-order system for `(y, y', …, y^{(n-1)})` with
/// classical RK4 on `steps` equal cells over `[0, d]`, splitting a cell at
/// every coefficient jump inside it.
pub fn fundamental_system<T: Real>(c: &CoefficientSet<T>, d: T, steps: usize) -> Result<FundamentalSystem<T>> {
    if steps < MIN_STEPS {
        return Err(Error::Parameter(format!("steps must be at least {MIN_STEPS}, got {steps}")));
    }
    if !(d > T::zero() && d.is_finite()) {
        return Err(Error::Parameter(format!("window length must be positive, got {d}")));
    }
    if c.offset + d > c.domain_end() {
        return Err(Error::Domain(format!(
            "window [{}, {}] leaves the coefficient domain [0, {})",
            c.offset,
            c.offset + d,
            c.domain_end()
        )));
    }
    let n = c.n;
    let stepsf: T = from_usize(steps);
    let x: Vec<T> = (0..=steps).map(|i| d * from_usize::<T>(i) / stepsf).collect();
    let zero = Complex::new(T::zero(), T::zero());
    // state[ν][l]
    let mut state: Vec<Vec<Complex<T>>> =
        (0..n).map(|nu| (0..n).map(|l| if l == nu { Complex::new(T::one(), T::zero()) } else { zero }).collect()).collect();
    let mut psi = vec![vec![vec![zero; steps + 1]; n]; n];
    let record = |psi: &mut Vec<Vec<Vec<Complex<T>>>>, state: &[Vec<Complex<T>>], i: usize| {
        for nu in 0..n {
            for l in 0..n {
                psi[nu][l][i] = state[nu][l];
            }
        }
    };
    record(&mut psi, &state, 0);
    let rhs = |y: &[Complex<T>], p: &[Complex<T>]| -> Vec<Complex<T>> {
        let mut dy: Vec<Complex<T>> = y[1..].to_vec();
        let mut top = -c.c0 * y[n - 1];
        for j in 2..=n {
            top -= p[j - 2] * y[n - j];
        }
        dy.push(top);
        dy
    };
    let axpy = |y: &[Complex<T>], k: &[Complex<T>], s: T| -> Vec<Complex<T>> {
        y.iter().zip(k).map(|(a, b)| *a + *b * s).collect()
    };
    let half: T = lit(0.5);
    let sixth: T = lit(1.0 / 6.0);
    for i in 0..steps {
        let (a, b) = (x[i], x[i + 1]);
        let mut cuts: Vec<T> = c
            .p
            .iter()
            .flat_map(|q| q.breakpoints(c.offset + a, c.offset + b))
            .map(|t| t - c.offset)
            .filter(|&t| t > a && t < b)
            .collect();
        cuts.sort_by(|u, v| u.partial_cmp(v).expect("finite breakpoints"));
        cuts.dedup();
        let mut nodes = vec![a];
        nodes.extend(cuts);
        nodes.push(b);
        for w in nodes.windows(2) {
            let (s0, s1) = (w[0], w[1]);
            let hs = s1 - s0;
            let p0 = c.eval(s0, false)?;
            let pm = c.eval(s0 + hs * half, false)?;
            let p1 = c.eval(s1, true)?;
            for y in state.iter_mut() {
                let k1 = rhs(y, &p0);
                let k2 = rhs(&axpy(y, &k1, hs * half), &pm);
                let k3 = rhs(&axpy(y, &k2, hs * half), &pm);
                let k4 = rhs(&axpy(y, &k3, hs), &p1);
                for l in 0..n {
                    y[l] += (k1[l] + (k2[l] + k3[l]) * lit::<T>(2.0) + k4[l]) * hs * sixth;
                }
            }
        }
        if state.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Integrity(format!("fundamental system overflowed near x = {b}")));
        }
        record(&mut psi, &state, i + 1);
    }
    let wronskian = (0..=steps)
        .map(|i| {
            let rows: Vec<Vec<Complex<T>>> = (0..n).map(|l| (0..n).map(|nu| psi[nu][l][i]).collect()).collect();
            small_determinant(&rows)
        })
        .collect();
    Ok(FundamentalSystem { n, c0: c.c0, offset: c.offset, x, psi, wronskian })
}

fn check_wronskian<T: Real>(fs: &FundamentalSystem<T>) -> Result<()> {
    for (&x, &w) in fs.x.iter().zip(&fs.wronskian) {
        if w.norm() <= (-fs.c0 * x).exp().norm() * lit(1e-12) {
            return Err(Error::Integrity(format!("Wronskian vanishes at x = {x}; the integration failed")));
        }
    }
    Ok(())
}

/// Running trapezoid integrals `I_ν(x_i) = ∫_0^{x_i} c_ν(ξ) g(ξ) dξ` of the
/// kernel factors, so that `f^{(s)}(x) = Σ_ν ψ_ν^{(s)}(x) I_ν(x)`.
fn running_integrals<T: Real>(fs: &FundamentalSystem<T>, factors: &[Vec<Complex<T>>], g: &[Complex<T>]) -> Vec<Vec<Complex<T>>> {
    let n = fs.n;
    let h2 = fs.h() * lit(0.5);
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![vec![zero; g.len()]; n];
    for nu in 0..n {
        for i in 1..g.len() {
            out[nu][i] = out[nu][i - 1] + (factors[i - 1][nu] * g[i - 1] + factors[i][nu] * g[i]) * h2;
        }
    }
    out
}

fn combine<T: Real>(fs: &FundamentalSystem<T>, integrals: &[Vec<Complex<T>>], s: usize) -> Vec<Complex<T>> {
    (0..fs.x.len())
        .map(|i| (0..fs.n).map(|nu| fs.psi[nu][s][i] * integrals[nu][i]).sum())
        .collect()
}

/// `f(x) = ∫_0^x K(x, ξ) g(ξ) dξ` with `K` the Wronski determinant whose last
/// row is `ψ(x)`, divided by `W(ξ)`. Trapezoid rule on the grid of `fs`.
///
/// The kernel is expanded along its last row, so the integral splits into
/// `n` running sums; the value at `x_i` uses `g` only on `[0, x_i]`.
pub fn cauchy_apply<T: Real>(fs: &FundamentalSystem<T>, g: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    Ok(cauchy_derivatives(fs, g)?.swap_remove(0))
}

/// `f, f', …, f^{(n-1)}` for `f = cauchy_apply(fs, g)`.
pub fn cauchy_derivatives<T: Real>(fs: &FundamentalSystem<T>, g: &[Complex<T>]) -> Result<Vec<Vec<Complex<T>>>> {
    if g.len() != fs.x.len() {
        return Err(Error::Parameter(format!("g has {} samples, the grid has {}", g.len(), fs.x.len())));
    }
    check_wronskian(fs)?;
    let factors: Vec<Vec<Complex<T>>> = (0..fs.x.len()).map(|i| fs.kernel_factors(i)).collect();
    let integrals = running_integrals(fs, &factors, g);
    Ok((0..fs.n).map(|s| combine(fs, &integrals, s)).collect())
}

/// Trapezoid weights of the grid `x` (any spacing).
fn trapezoid_weights<T: Real>(x: &[T]) -> Vec<T> {
    let mut w = vec![T::zero(); x.len()];
    for i in 1..x.len() {
        let half = (x[i] - x[i - 1]) * lit(0.5);
        w[i - 1] += half;
        w[i] += half;
    }
    w
}

fn gram<T: Real>(funcs: &[Vec<Complex<T>>], w: &[T]) -> DenseMatrix<T> {
    DenseMatrix::from_fn(funcs.len(), funcs.len(), |s, t| {
        funcs[s].iter().zip(&funcs[t]).zip(w).map(|((a, b), &wi)| a.conj() * b * wi).sum()
    })
}

/// The functions `W_{ks}` (`s = 0..n-1`) whose conjugates span the
/// obstruction subspace, with their Gram matrix and numerical rank.
#[derive(Clone, Debug)]
pub struct BoundarySubspace<T> {
    /// `functions[s][i] = W_{ks}(x_i)`.
    pub functions: Vec<Vec<Complex<T>>>,
    /// `G_{st} = ∫ W_{ks} conj(W_{kt})`, the Gram matrix of the conjugates.
    pub gram: DenseMatrix<T>,
    pub gram_eigenvalues: Vec<T>,
    pub rank: usize,
}

/// `W_{ks}(x)`: Wronski rows `ψ, …, ψ^{(n-2)}` at `x` and last row `ψ^{(s)}(d)`,
/// times `e^{x C₀}`.
///
/// `e^{x C₀}` is taken as `1/W(x)` of the integrated system. The two agree
/// to integration accuracy, and this choice makes `∫ W_{ks} g` equal the
/// discrete `f^{(s)}(d)` of [`cauchy_apply`] exactly.
pub fn boundary_subspace<T: Real>(fs: &FundamentalSystem<T>) -> Result<BoundarySubspace<T>> {
    check_wronskian(fs)?;
    let n = fs.n;
    let last = fs.x.len() - 1;
    let factors: Vec<Vec<Complex<T>>> = (0..fs.x.len()).map(|i| fs.kernel_factors(i)).collect();
    let functions: Vec<Vec<Complex<T>>> = (0..n)
        .map(|s| {
            factors
                .iter()
                .map(|c| (0..n).map(|nu| fs.psi[nu][s][last] * c[nu]).sum())
                .collect()
        })
        .collect();
    let w = trapezoid_weights(&fs.x);
    let conj: Vec<Vec<Complex<T>>> = functions.iter().map(|f| f.iter().map(|z| z.conj()).collect()).collect();
    let gram = gram(&conj, &w);
    let gram_eigenvalues = gram.hermitian_eigenvalues()?;
    let top = gram_eigenvalues.iter().copied().fold(T::zero(), T::max);
    let rank = gram_eigenvalues.iter().filter(|&&v| v > top * lit(1e-10)).count();
    Ok(BoundarySubspace { functions, gram, gram_eigenvalues, rank })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IndependenceGram<T> {
    pub lambda_min: T,
    pub lambda_max: T,
    /// `λ_min > 1e-10 λ_max`.
    pub independent: bool,
}

/// Extreme eigenvalues of the Gram matrix of `phis` restricted to `[0, d1]`
/// (trapezoid weights over the nodes of `x` not beyond `d1`).
pub fn independence_gram<T: Real>(phis: &[Vec<Complex<T>>], x: &[T], d1: T) -> Result<IndependenceGram<T>> {
    if phis.is_empty() {
        return Err(Error::Parameter("need at least one function".into()));
    }
    if phis.iter().any(|f| f.len() != x.len()) {
        return Err(Error::Parameter("functions and grid differ in length".into()));
    }
    if !(d1 > T::zero() && x.first().is_some_and(|&x0| x0 == T::zero())) {
        return Err(Error::Parameter("need d1 > 0 and a grid starting at 0".into()));
    }
    let m = x.partition_point(|&t| t <= d1 * (T::one() + lit(1e-12)));
    if m < 2 {
        return Err(Error::Parameter(format!("fewer than two grid nodes in [0, {d1}]")));
    }
    let w = trapezoid_weights(&x[..m]);
    let cut: Vec<Vec<Complex<T>>> = phis.iter().map(|f| f[..m].to_vec()).collect();
    let ev = gram(&cut, &w).hermitian_eigenvalues()?;
    let lambda_min = ev[0].max(T::zero());
    let lambda_max = ev[ev.len() - 1];
    Ok(IndependenceGram { lambda_min, lambda_max, independent: lambda_min > lambda_max * lit(1e-10) })
}

#[derive(Clone, Debug)]
pub struct NecessityOptions<T> {
    /// Grid cells per window.
    pub steps: usize,
    /// Halve `d` until `η = Σ C_j d^{j-1}` drops below this; `None` keeps `d`.
    pub eta_target: Option<T>,
    /// Absolute tolerance of the window integrals `C_j`.
    pub quad_tol: T,
}

impl<T: Real> Default for NecessityOptions<T> {
    fn default() -> Self {
        Self { steps: 256, eta_target: None, quad_tol: lit(1e-10) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowResult<T> {
    pub k: usize,
    pub a: T,
    /// `‖R̊_k‖`: norm of the Cauchy operator restricted off the obstruction subspace.
    pub restricted_norm: T,
    /// `s_{n+1}` of the discretized Cauchy operator.
    pub s_next: T,
    /// `‖l(y_k)‖` for the normalized bump.
    pub residual: T,
    /// `max_s max(|y^{(s)}(0)|, |y^{(s)}(d)|)`, `s < n`.
    pub boundary_max: T,
    pub norm: T,
    /// `max |ψ_ν^{(l)}|` on this window.
    pub psi_max: T,
    pub failure: Option<String>,
    /// Absolute abscissae `a + x_i`.
    #[serde(skip)]
    pub bump_x: Vec<T>,
    #[serde(skip)]
    pub bump: Vec<Complex<T>>,
}

impl<T: Real> WindowResult<T> {
    /// `x,re,im` rows.
    pub fn bump_csv(&self) -> String {
        let mut out = String::from("x,re,im\n");
        for (x, y) in self.bump_x.iter().zip(&self.bump) {
            out.push_str(&format!("{x},{},{}\n", y.re, y.im));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NecessityReport<T> {
    pub n: usize,
    pub d_requested: T,
    pub d: T,
    pub eta: T,
    /// `C_1..C_n`, maxima over the windows.
    pub c: Vec<T>,
    /// `max_s (e^d + d^{s-1} e^d Σ C_j / (1 - η))`, when `η < 1`.
    pub psi_bound: Option<T>,
    pub psi_max: T,
    pub residual_max: T,
    pub residual_min: T,
    pub windows: Vec<WindowResult<T>>,
}

impl<T: Real> NecessityReport<T> {
    /// `residual_max / residual_min`.
    pub fn residual_spread(&self) -> T {
        self.residual_max / self.residual_min
    }

    pub fn all_succeeded(&self) -> bool {
        self.windows.iter().all(|w| w.failure.is_none())
    }
}

fn eta<T: Real>(c: &[T], d: T) -> T {
    c.iter().enumerate().map(|(j, &cj)| cj * d.powi(j as i32)).sum()
}

/// Builds, for every window `[a_k, a_k + d]`, the Cauchy operator of the
/// shifted coefficients, restricts it off the obstruction subspace and turns
/// its top singular vector into a bump `y_k` with `‖y_k‖ = 1`, all
/// derivatives below order `n` vanishing at both ends, and residual
/// `‖l(y_k)‖ = 1/‖R̊_k‖`.
pub fn necessity_experiment<T: Real>(
    starts: &[T],
    d: T,
    template: &CoefficientSet<T>,
    opts: &NecessityOptions<T>,
) -> Result<NecessityReport<T>> {
    if starts.is_empty() {
        return Err(Error::Parameter("need at least one window".into()));
    }
    if !(d > T::zero()) {
        return Err(Error::Parameter(format!("window length must be positive, got {d}")));
    }
    if starts.windows(2).any(|w| w[1] < w[0] + d) {
        return Err(Error::Parameter("windows must be increasing and disjoint".into()));
    }
    if let Some(t) = opts.eta_target {
        if !(t > T::zero() && t < T::one()) {
            return Err(Error::Parameter(format!("eta target must lie in (0, 1), got {t}")));
        }
    }
    let integrals = |len: T| -> Result<Vec<T>> {
        let per = starts
            .iter()
            .map(|&a| template.window_integrals(a, len, opts.quad_tol))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..template.n).map(|j| per.iter().map(|c| c[j]).fold(T::zero(), T::max)).collect())
    };
    let mut len = d;
    let mut c = integrals(len)?;
    if let Some(target) = opts.eta_target {
        while eta(&c, len) >= target {
            len *= lit(0.5);
            if len < d * lit(1e-6) {
                return Err(Error::Parameter(format!("η stays above {target} down to d = {len}")));
            }
            c = integrals(len)?;
        }
    }
    let eta_val = eta(&c, len);
    let n = template.n;
    let windows = starts
        .par_iter()
        .enumerate()
        .map(|(k, &a)| window_bump(k + 1, a, len, &template.window(a)?, opts.steps))
        .collect::<Result<Vec<_>>>()?;
    let ok: Vec<&WindowResult<T>> = windows.iter().filter(|w| w.failure.is_none()).collect();
    let residual_max = ok.iter().map(|w| w.residual).fold(T::zero(), T::max);
    let residual_min = ok.iter().map(|w| w.residual).fold(T::infinity(), T::min);
    let psi_max = windows.iter().map(|w| w.psi_max).fold(T::zero(), T::max);
    let total: T = c.iter().copied().sum();
    let psi_bound = (eta_val < T::one()).then(|| {
        let core = len.exp() * total / (T::one() - eta_val);
        (1..=n).map(|s| len.exp() + len.powi(s as i32 - 1) * core).fold(T::zero(), T::max)
    });
    Ok(NecessityReport {
        n,
        d_requested: d,
        d: len,
        eta: eta_val,
        c,
        psi_bound,
        psi_max,
        residual_max,
        residual_min,
        windows,
    })
}

fn window_bump<T: Real>(k: usize, a: T, d: T, coeffs: &CoefficientSet<T>, steps: usize) -> Result<WindowResult<T>> {
    let fs = fundamental_system(coeffs, d, steps)?;
    check_wronskian(&fs)?;
    let n = fs.n;
    let m = fs.x.len();
    let w = trapezoid_weights(&fs.x);
    let sw: Vec<T> = w.iter().map(|v| v.sqrt()).collect();
    let factors: Vec<Vec<Complex<T>>> = (0..m).map(|i| fs.kernel_factors(i)).collect();
    // weighted Cauchy matrix  W^{1/2} M W^{-1/2}
    let h2 = fs.h() * lit(0.5);
    let op = DenseMatrix::from_fn(m, m, |i, j| {
        if j > i || i == 0 {
            return Complex::new(T::zero(), T::zero());
        }
        let t = if j == 0 || j == i { h2 } else { h2 + h2 };
        let kern: Complex<T> = (0..n).map(|nu| fs.psi[nu][0][i] * factors[j][nu]).sum();
        kern * t * sw[i] / sw[j]
    });
    let s_all = op.singular_values()?;
    let s_next = s_all.get(n).copied().unwrap_or(T::zero());
    // orthonormal basis of W^{1/2} conj(W_ks)
    let bs = boundary_subspace(&fs)?;
    let mut basis: Vec<Vec<Complex<T>>> = Vec::new();
    let scale = bs
        .functions
        .iter()
        .map(|f| f.iter().zip(&w).map(|(z, &wi)| z.norm_sqr() * wi).sum::<T>().sqrt())
        .fold(T::zero(), T::max);
    for f in &bs.functions {
        let mut v: Vec<Complex<T>> = f.iter().zip(&sw).map(|(z, &s)| z.conj() * s).collect();
        for _ in 0..2 {
            for q in &basis {
                let c: Complex<T> = q.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= *qi * c;
                }
            }
        }
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if nv > scale * lit(1e-10) {
            basis.push(v.into_iter().map(|z| z / nv).collect());
        }
    }
    let restricted = DenseMatrix::from_fn(m, m, |i, j| {
        let mut v = op[(i, j)];
        for q in &basis {
            let aq: Complex<T> = (0..m).map(|l| op[(i, l)] * q[l]).sum();
            v -= aq * q[j].conj();
        }
        v
    });
    let (s, _, vmat) = restricted.svd()?;
    let restricted_norm = s[0];
    let psi_max = fs.max_abs();
    let bump_x: Vec<T> = fs.x.iter().map(|&x| a + x).collect();
    if s_next < lit(1e-12) || restricted_norm < lit(1e-12) {
        return Ok(WindowResult {
            k,
            a,
            restricted_norm,
            s_next,
            residual: T::infinity(),
            boundary_max: T::nan(),
            norm: T::nan(),
            psi_max,
            failure: Some(format!("s_(n+1) = {s_next} is below 1e-12")),
            bump_x,
            bump: Vec::new(),
        });
    }
    let g: Vec<Complex<T>> = (0..m).map(|j| vmat[(j, 0)] / sw[j]).collect();
    let derivs = cauchy_derivatives(&fs, &g)?;
    let wnorm = |v: &[Complex<T>]| v.iter().zip(&w).map(|(z, &wi)| z.norm_sqr() * wi).sum::<T>().sqrt();
    let f_norm = wnorm(&derivs[0]);
    let g_norm = wnorm(&g);
    let boundary_max = derivs
        .iter()
        .map(|f| (f[0].norm() / f_norm).max(f[m - 1].norm() / f_norm))
        .fold(T::zero(), T::max);
    let bump: Vec<Complex<T>> = derivs[0].iter().map(|z| z / f_norm).collect();
    let norm = wnorm(&bump);
    Ok(WindowResult {
        k,
        a,
        restricted_norm,
        s_next,
        residual: g_norm / f_norm,
        boundary_max,
        norm,
        psi_max,
        failure: None,
        bump_x,
        bump,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx;

    fn zero_coeffs(n: usize, c0: Complex<f64>) -> CoefficientSet<f64> {
        CoefficientSet::constant(n, c0, &vec![cplx(0.0, 0.0); n - 1], 100.0).unwrap()
    }

    #[test]
    fn trivial_second_order_system() {
        let fs = fundamental_system(&zero_coeffs(2, cplx(0.0, 0.0)), 1.0, 64).unwrap();
        for (i, &x) in fs.x().iter().enumerate() {
            assert!((fs.psi(0, 0)[i] - 1.0).norm() < 1e-15);
            assert!((fs.psi(1, 0)[i] - x).norm() < 1e-14);
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let c = CoefficientSet::<f64>::constant(2, cplx(0.0, 0.0), &[cplx(1.0, 0.0)], 10.0).unwrap();
        let fs = fundamental_system(&c, 1.0, 400).unwrap();
        for (i, &x) in fs.x().iter().enumerate() {
            assert!((fs.psi(0, 0)[i] - x.cos()).norm() < 1e-8);
            assert!((fs.psi(1, 0)[i] - x.sin()).norm() < 1e-8);
        }
    }

    #[test]
    fn wronskian_is_exponential() {
        let c = zero_coeffs(3, cplx(1.0, 1.0));
        let fs = fundamental_system(&c, 1.0, 256).unwrap();
        assert!(fs.wronskian_deviation() < 1e-6);
    }

    #[test]
    fn step_coefficients_are_split_at_jumps() {
        // p_2 = 1 on [0, 0.3), 4 on [0.3, 1)
        let pieces = vec![
            crate::potential::Piece { a: 0.0, b: 0.3, kind: PieceKind::constant(cplx(1.0, 0.0)) },
            crate::potential::Piece { a: 0.3, b: 1.0, kind: PieceKind::constant(cplx(4.0, 0.0)) },
        ];
        let q = Potential::new(pieces, 1.0).unwrap();
        let c = CoefficientSet::new(2, cplx(0.0, 0.0), vec![q]).unwrap();
        let fs = fundamental_system(&c, 1.0, 64).unwrap();
        // ψ_1 = cos x up to 0.3, then matched to cos/sin with frequency 2
        let (y0, dy0) = (0.3f64.cos(), -0.3f64.sin());
        let exact = |x: f64| y0 * (2.0 * (x - 0.3)).cos() + dy0 / 2.0 * (2.0 * (x - 0.3)).sin();
        assert!((fs.psi(0, 0)[64] - exact(1.0)).norm() < 1e-7);
    }

    #[test]
    fn cauchy_of_constant_and_linear() {
        let fs = fundamental_system(&zero_coeffs(2, cplx(0.0, 0.0)), 1.0, 200).unwrap();
        let ones = vec![cplx(1.0, 0.0); 201];
        let f = cauchy_apply(&fs, &ones).unwrap();
        for (i, &x) in fs.x().iter().enumerate() {
            assert!((f[i] - x * x / 2.0).norm() < 1e-12);
        }
        let g: Vec<Complex<f64>> = fs.x().iter().map(|&x| cplx(x, 0.0)).collect();
        let f = cauchy_apply(&fs, &g).unwrap();
        for (i, &x) in fs.x().iter().enumerate() {
            assert!((f[i] - x.powi(3) / 6.0).norm() < 1e-5);
        }
    }

    #[test]
    fn cauchy_variation_of_parameters() {
        // y'' + y = cos x, y(0) = y'(0) = 0  ⇒  y = x sin(x) / 2
        let c = CoefficientSet::<f64>::constant(2, cplx(0.0, 0.0), &[cplx(1.0, 0.0)], 10.0).unwrap();
        let fs = fundamental_system(&c, 1.0, 1000).unwrap();
        let g: Vec<Complex<f64>> = fs.x().iter().map(|&x| cplx(x.cos(), 0.0)).collect();
        let f = cauchy_apply(&fs, &g).unwrap();
        for (i, &x) in fs.x().iter().enumerate() {
            assert!((f[i] - x * x.sin() / 2.0).norm() < 1e-6);
        }
    }

    #[test]
    fn boundary_subspace_of_free_operator() {
        let fs = fundamental_system(&zero_coeffs(2, cplx(0.0, 0.0)), 1.0, 100).unwrap();
        let bs = boundary_subspace(&fs).unwrap();
        assert_eq!(bs.rank, 2);
        for (i, &x) in fs.x().iter().enumerate() {
            assert!((bs.functions[0][i] - (1.0 - x)).norm() < 1e-13);
            assert!((bs.functions[1][i] - 1.0).norm() < 1e-13);
        }
        assert!(bs.gram_eigenvalues[0] > 0.0);
    }

    #[test]
    fn independence_examples() {
        let x: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let f = |g: fn(f64) -> f64| x.iter().map(|&t| cplx(g(t), 0.0)).collect::<Vec<_>>();
        assert!(independence_gram(&[f(|_| 1.0), f(|t| t)], &x, 0.5).unwrap().independent);
        let dep = independence_gram(&[f(|t| t), f(|t| 2.0 * t)], &x, 0.7).unwrap();
        assert!(!dep.independent);
        assert!(dep.lambda_min < 1e-14);
        let x: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-4).collect();
        let sc = [
            x.iter().map(|&t| cplx(t.sin(), 0.0)).collect::<Vec<_>>(),
            x.iter().map(|&t| cplx(t.cos(), 0.0)).collect::<Vec<_>>(),
        ];
        let r = independence_gram(&sc, &x, 0.1).unwrap();
        assert!(r.independent && r.lambda_min < 1e-3);
    }

    #[test]
    fn free_bumps_are_translation_invariant() {
        let c = zero_coeffs(2, cplx(0.0, 0.0));
        let rep = necessity_experiment(&[0.0, 3.0, 7.0], 1.0, &c, &NecessityOptions { steps: 128, ..Default::default() }).unwrap();
        assert!(rep.all_succeeded());
        let r0 = rep.windows[0].residual;
        for w in &rep.windows {
            assert_eq!(w.residual, r0);
            assert!((w.norm - 1.0).abs() < 1e-10);
            assert!(w.boundary_max < 1e-8);
            assert!(w.restricted_norm >= w.s_next - 1e-10);
        }
        // l(y) = y'': compare with the second difference of the bump
        let w = &rep.windows[0];
        let h = 1.0 / 128.0;
        let dd: f64 = (1..128)
            .map(|i| ((w.bump[i - 1] - w.bump[i] * 2.0 + w.bump[i + 1]) / (h * h)).norm_sqr() * h)
            .sum::<f64>()
            .sqrt();
        assert!((dd - r0).abs() < 0.02 * r0, "{dd} vs {r0}");
    }

    #[test]
    fn eta_shrinks_window() {
        let c = CoefficientSet::<f64>::constant(2, cplx(0.0, 0.0), &[cplx(1.0, 0.0)], 100.0).unwrap();
        let opts = NecessityOptions { steps: 64, eta_target: Some(0.5), ..Default::default() };
        let rep = necessity_experiment(&[0.0, 2.0], 1.0, &c, &opts).unwrap();
        assert_eq!(rep.d, 0.5);
        assert!((rep.eta - 0.25).abs() < 1e-9);
        assert!(rep.psi_max <= rep.psi_bound.unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CoefficientSet::constant(7, cplx(0.0, 0.0), &[cplx(0.0, 0.0); 6], 1.0).is_err());
        assert!(CoefficientSet::<f64>::new(3, cplx(0.0, 0.0), vec![]).is_err());
        let c = zero_coeffs(2, cplx(0.0, 0.0));
        assert!(fundamental_system(&c, 1.0, 32).is_err());
        assert!(fundamental_system(&c.window(99.5).unwrap(), 1.0, 64).is_err());
        assert!(necessity_experiment(&[0.0, 0.5], 1.0, &c, &NecessityOptions::default()).is_err());
    }
}
