//! Eigenvalues, singular values, resolvents and the compactness diagnostic.

use std::cmp::Ordering;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{assemble, BoundaryForm, Grid, OperatorMatrix};
use crate::linalg::{
    symmetric_tridiagonal_singular_values, top_eigenpairs, tridiagonal_eigenvalues, DenseMatrix, LanczosOptions,
    TridiagonalLu, TridiagonalSpectrum,
};
use crate::potential::Potential;
use crate::scalar::{from_usize, lit, to_f64};
use crate::{Error, Real, Result};

/// Orders by modulus, then real part, then imaginary part.
pub fn modulus_order<T: Real>(a: &Complex<T>, b: &Complex<T>) -> Ordering {
    a.norm()
        .partial_cmp(&b.norm())
        .unwrap_or(Ordering::Equal)
        .then(a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal))
        .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
}

pub fn sort_by_modulus<T: Real>(v: &mut [Complex<T>]) {
    v.sort_by(modulus_order);
}

/// Everything that exposes a full spectrum and full singular values.
pub trait SpectralSource<T: Real> {
    fn dim(&self) -> usize;
    /// Eigenvalues sorted by modulus, ascending.
    fn eigenvalues(&self) -> Result<Vec<Complex<T>>>;
    /// Singular values, descending.
    fn singular_values(&self) -> Result<Vec<T>>;
}

/// Matrix-free access, enough for Lanczos.
pub trait LinearOperator<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>>;
    fn apply_adjoint(&self, x: &[Complex<T>]) -> Vec<Complex<T>>;
}

/// Eigenvalues of an operator matrix, sorted by modulus.
pub fn eigenvalues<T: Real>(m: &OperatorMatrix<T>) -> Result<TridiagonalSpectrum<T>> {
    let mut s = tridiagonal_eigenvalues(m.tridiagonal())?;
    sort_by_modulus(&mut s.eigenvalues);
    Ok(s)
}

/// Singular values of an operator matrix, descending.
pub fn singular_values<T: Real>(m: &OperatorMatrix<T>) -> Result<Vec<T>> {
    symmetric_tridiagonal_singular_values(m.tridiagonal())
}

impl<T: Real> SpectralSource<T> for OperatorMatrix<T> {
    fn dim(&self) -> usize {
        OperatorMatrix::dim(self)
    }
    fn eigenvalues(&self) -> Result<Vec<Complex<T>>> {
        Ok(eigenvalues(self)?.eigenvalues)
    }
    fn singular_values(&self) -> Result<Vec<T>> {
        singular_values(self)
    }
}

impl<T: Real> SpectralSource<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn eigenvalues(&self) -> Result<Vec<Complex<T>>> {
        let mut ev = DenseMatrix::eigenvalues(self)?;
        sort_by_modulus(&mut ev);
        Ok(ev)
    }
    fn singular_values(&self) -> Result<Vec<T>> {
        DenseMatrix::singular_values(self)
    }
}

impl<T: Real> LinearOperator<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.matvec(x)
    }
    fn apply_adjoint(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.matvec_adjoint(x)
    }
}

impl<T: Real> LinearOperator<T> for OperatorMatrix<T> {
    fn dim(&self) -> usize {
        OperatorMatrix::dim(self)
    }
    fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.tridiagonal().matvec(x)
    }
    fn apply_adjoint(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.tridiagonal().matvec_adjoint(x)
    }
}

/// `(m - λI)⁻¹` applied through a tridiagonal LU factorization.
#[derive(Clone, Debug)]
pub struct Resolvent<'a, T> {
    matrix: &'a OperatorMatrix<T>,
    shift: Complex<T>,
    lu: TridiagonalLu<T>,
}

impl<'a, T: Real> Resolvent<'a, T> {
    /// Factorizes `m - λI`; fails with [`Error::SingularShift`] when `λ` is
    /// within `solver_tol · ‖m‖` of the spectrum.
    pub fn new(m: &'a OperatorMatrix<T>, lambda: Complex<T>) -> Result<Self> {
        let spec = eigenvalues(m)?;
        let norm = m.tridiagonal().norm_one();
        let (nearest, dist) = spec
            .eigenvalues
            .iter()
            .map(|z| (*z, (z - lambda).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
            .expect("nonempty spectrum");
        let guard = spec.solver_tol.max(T::epsilon() * from_usize(m.dim())) * norm;
        if dist <= guard {
            return Err(Error::SingularShift {
                distance: to_f64(dist),
                nearest_re: to_f64(nearest.re),
                nearest_im: to_f64(nearest.im),
            });
        }
        let lu = m.tridiagonal().shifted(lambda).lu()?;
        Ok(Resolvent { matrix: m, shift: lambda, lu })
    }

    /// Inverse of `m` itself (`λ = 0`).
    pub fn inverse(m: &'a OperatorMatrix<T>) -> Result<Self> {
        Self::new(m, Complex::new(T::zero(), T::zero()))
    }

    pub fn shift(&self) -> Complex<T> {
        self.shift
    }

    pub fn matrix(&self) -> &OperatorMatrix<T> {
        self.matrix
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        self.lu.solve(b)
    }

    pub fn solve_adjoint(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        self.lu.solve_adjoint(b)
    }

    /// Dense resolvent, column by column, with the residual
    /// `max_ij |((m - λI)R - I)_ij| ≤ 1e-8` enforced.
    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        let n = self.matrix.dim();
        let shifted = self.matrix.tridiagonal().shifted(self.shift);
        let cols: Vec<Vec<Complex<T>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![Complex::new(T::zero(), T::zero()); n];
                e[j] = Complex::new(T::one(), T::zero());
                self.lu.solve_in_place(&mut e);
                e
            })
            .collect();
        let residual = cols
            .par_iter()
            .enumerate()
            .map(|(j, c)| {
                let r = shifted.matvec(c);
                r.iter()
                    .enumerate()
                    .map(|(i, z)| if i == j { (z - T::one()).norm() } else { z.norm() })
                    .fold(T::zero(), T::max)
            })
            .reduce(T::zero, T::max);
        if residual > lit(1e-8) {
            return Err(Error::Integrity(format!("resolvent residual {residual} exceeds 1e-8")));
        }
        Ok(DenseMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }
}

impl<T: Real> LinearOperator<T> for Resolvent<'_, T> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }
    fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.solve(x)
    }
    fn apply_adjoint(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.solve_adjoint(x)
    }
}

impl<T: Real> SpectralSource<T> for Resolvent<'_, T> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }
    fn eigenvalues(&self) -> Result<Vec<Complex<T>>> {
        let mut ev: Vec<Complex<T>> = eigenvalues(self.matrix)?
            .eigenvalues
            .into_iter()
            .map(|z| (z - self.shift).inv())
            .collect();
        sort_by_modulus(&mut ev);
        Ok(ev)
    }
    fn singular_values(&self) -> Result<Vec<T>> {
        let shifted = self.matrix.tridiagonal().shifted(self.shift);
        let s = symmetric_tridiagonal_singular_values(&shifted)?;
        Ok(s.iter().rev().map(|&v| T::one() / v).collect())
    }
}

/// `(m - λI)⁻¹` as a dense matrix.
pub fn resolvent<T: Real>(m: &OperatorMatrix<T>, lambda: Complex<T>) -> Result<DenseMatrix<T>> {
    Resolvent::new(m, lambda)?.to_dense()
}

/// A singular value with its right singular vector.
#[derive(Clone, Debug)]
pub struct SingularTriplet<T> {
    pub value: T,
    pub right: Vec<Complex<T>>,
}

/// The `k` largest singular values of `op` by Lanczos on `op* op`.
pub fn top_singular_values<T: Real, O: LinearOperator<T> + ?Sized>(op: &O, k: usize) -> Result<Vec<SingularTriplet<T>>> {
    let pairs = top_eigenpairs(op.dim(), k, |x| op.apply_adjoint(&op.apply(x)), LanczosOptions::default())?;
    Ok(pairs
        .into_iter()
        .map(|p| SingularTriplet { value: p.value.max(T::zero()).sqrt(), right: p.vector })
        .collect())
}

/// Eigenvalues and singular values of one matrix.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport<T> {
    pub eigenvalues: Vec<Complex<T>>,
    pub singular_values: Vec<T>,
    pub solver_tol: T,
    pub provenance: String,
}

pub fn spectral_report<T: Real>(m: &OperatorMatrix<T>) -> Result<SpectralReport<T>> {
    let spec = eigenvalues(m)?;
    Ok(SpectralReport {
        eigenvalues: spec.eigenvalues,
        singular_values: singular_values(m)?,
        solver_tol: spec.solver_tol,
        provenance: format!(
            "{}; N = {}, X = {}, bc = ({}, {})",
            m.potential_id(),
            m.dim(),
            m.grid().x_end(),
            m.bc().a(),
            m.bc().b()
        ),
    })
}

/// Result of the product inequality `∏_{i≤k} s_i ≥ ∏_{i≤k} |λ_i|`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeylCheck<T> {
    pub k: usize,
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

/// Compares the `k` largest singular values with the `k` eigenvalues of
/// largest modulus (sorted descending here).
pub fn weyl_check<T: Real, S: SpectralSource<T> + ?Sized>(m: &S, k: usize) -> Result<WeylCheck<T>> {
    let s = m.singular_values()?;
    let ev = m.eigenvalues()?;
    weyl_from_spectra(&s, &ev, k)
}

/// [`weyl_check`] on precomputed spectra (`s` descending, `ev` in any order).
pub fn weyl_from_spectra<T: Real>(s: &[T], ev: &[Complex<T>], k: usize) -> Result<WeylCheck<T>> {
    if k == 0 || k > s.len() || k > ev.len() {
        return Err(Error::Parameter(format!("need 1 ≤ k ≤ N, got k = {k}")));
    }
    let mut moduli: Vec<T> = ev.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let lhs = s[..k].iter().fold(T::one(), |acc, &v| acc * v);
    let rhs = moduli[..k].iter().fold(T::one(), |acc, &v| acc * v);
    Ok(WeylCheck { k, lhs, rhs, pass: lhs >= rhs * (T::one() - lit(1e-10)) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompactnessVerdict {
    StabilizesCompactLike,
    CollapsesOrPlateausNoncompactLike,
    Inconclusive,
}

/// Tunables of [`compactness_diagnostic`].
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticOptions<T> {
    /// Grid step shared by all `X` (so `N = round(X/h) - 1`).
    pub h: T,
    pub drift_tol: T,
    pub exponent_threshold: T,
    /// Half-width `R` of the window `|λ| ≤ R` whose eigenvalue count is tracked.
    pub count_radius: T,
}

impl<T: Real> Default for DiagnosticOptions<T> {
    fn default() -> Self {
        DiagnosticOptions { h: lit(0.01), drift_tol: lit(1e-4), exponent_threshold: lit(-1.5), count_radius: lit(25.0) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompactnessDiagnostic<T> {
    pub x_list: Vec<T>,
    /// Per `X`: the first `k` eigenvalues, continuity-matched to the
    /// previous `X` where matching succeeded.
    pub tracked: Vec<Vec<Complex<T>>>,
    pub verdict: CompactnessVerdict,
    /// Max relative movement of tracked eigenvalues between the last two `X`;
    /// `None` when matching was ambiguous.
    pub drift: Option<T>,
    /// Log-log slope of `|λ_1|` against `X`.
    pub lambda1_exponent: T,
    /// Number of eigenvalues with `|λ| ≤ R` per `X`.
    pub window_counts: Vec<usize>,
    pub diagnostics: Vec<String>,
}

impl<T: Real> CompactnessDiagnostic<T> {
    /// `X,j,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("X,j,re,im\n");
        for (x, row) in self.x_list.iter().zip(&self.tracked) {
            for (j, z) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{:e},{:e}\n", x, j + 1, to_f64(z.re), to_f64(z.im)));
            }
        }
        out
    }
}

/// Matches each of `prev` to the unique eigenvalue of `next` inside half its
/// isolation radius (isolation measured within `prev_all`).
pub fn continuity_match<T: Real>(
    prev: &[Complex<T>],
    prev_all: &[Complex<T>],
    next: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let mut used = Vec::with_capacity(prev.len());
    let mut out = Vec::with_capacity(prev.len());
    for &p in prev {
        let isolation = prev_all
            .iter()
            .filter(|&&z| z != p)
            .map(|z| (z - p).norm())
            .fold(T::infinity(), T::min);
        let radius = isolation * lit(0.5);
        let cands: Vec<(usize, Complex<T>)> =
            next.iter().copied().enumerate().filter(|(_, z)| (z - p).norm() <= radius).collect();
        if cands.len() != 1 || used.contains(&cands[0].0) {
            return Err(Error::AmbiguousMatch {
                target: p.to_string(),
                candidates: cands.iter().map(|(_, z)| z.to_string()).collect(),
            });
        }
        used.push(cands[0].0);
        out.push(cands[0].1);
    }
    Ok(out)
}

fn loglog_slope<T: Real>(x: &[T], y: &[T]) -> T {
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.max(T::min_positive_value()).ln()).collect();
    let n: T = from_usize(x.len());
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let sxy: T = lx.iter().zip(&ly).map(|(a, b)| (*a - mx) * (*b - my)).sum();
    let sxx: T = lx.iter().map(|a| (*a - mx) * (*a - mx)).sum();
    sxy / sxx
}

/// Domain-growth study of the first `k` eigenvalues on `[0, X]`, `X ∈ x_list`.
///
/// Rules, in order:
/// 1. `StabilizesCompactLike` if matching succeeded on the last step, the
///    relative drift there is below `drift_tol`, and `λ_1 ≠ 0`;
/// 2. `CollapsesOrPlateausNoncompactLike` if `|λ_1| ~ X^p` with
///    `p < exponent_threshold`, or the count of `|λ| ≤ R` strictly grows
///    from the first to the last `X` without decreasing in between;
/// 3. `Inconclusive` otherwise.
pub fn compactness_diagnostic<T: Real>(
    q: &Potential<T>,
    bc: &BoundaryForm<T>,
    x_list: &[T],
    k: usize,
    opts: DiagnosticOptions<T>,
) -> Result<CompactnessDiagnostic<T>> {
    if x_list.len() < 3 || x_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter("x_list must be increasing with at least 3 entries".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("track at least one eigenvalue".into()));
    }
    if !(opts.h > T::zero()) {
        return Err(Error::Parameter("grid step must be positive".into()));
    }
    let spectra: Vec<Vec<Complex<T>>> = x_list
        .par_iter()
        .map(|&x| {
            let n = (x / opts.h).round().to_usize().unwrap_or(0).saturating_sub(1);
            let m = assemble(q, &Grid::new(x, n)?, bc)?;
            Ok(eigenvalues(&m)?.eigenvalues)
        })
        .collect::<Result<Vec<_>>>()?;
    if spectra.iter().any(|s| s.len() < k) {
        return Err(Error::Parameter(format!("k = {k} exceeds the grid size")));
    }
    let mut diagnostics = Vec::new();
    let mut tracked: Vec<Vec<Complex<T>>> = vec![spectra[0][..k].to_vec()];
    let mut last_match_ok = false;
    for i in 1..spectra.len() {
        let prev = tracked[i - 1].clone();
        match continuity_match(&prev, &spectra[i - 1], &spectra[i]) {
            Ok(m) => {
                tracked.push(m);
                last_match_ok = true;
            }
            Err(e) => {
                diagnostics.push(format!("X = {}: {e}", x_list[i]));
                tracked.push(spectra[i][..k].to_vec());
                last_match_ok = false;
            }
        }
    }
    let last = tracked.len() - 1;
    let drift = last_match_ok.then(|| {
        tracked[last]
            .iter()
            .zip(&tracked[last - 1])
            .map(|(a, b)| (a - b).norm() / a.norm().max(T::min_positive_value()))
            .fold(T::zero(), T::max)
    });
    let lambda1: Vec<T> = spectra.iter().map(|s| s[0].norm()).collect();
    let lambda1_exponent = loglog_slope(x_list, &lambda1);
    let window_counts: Vec<usize> =
        spectra.iter().map(|s| s.iter().filter(|z| z.norm() <= opts.count_radius).count()).collect();
    let count_grows = window_counts.last() > window_counts.first() && window_counts.windows(2).all(|w| w[1] >= w[0]);
    let bounded_away = lambda1.iter().copied().fold(T::infinity(), T::min) > lit(1e-8);
    let verdict = match drift {
        Some(d) if d < opts.drift_tol && bounded_away => CompactnessVerdict::StabilizesCompactLike,
        _ if lambda1_exponent < opts.exponent_threshold || count_grows => {
            CompactnessVerdict::CollapsesOrPlateausNoncompactLike
        }
        _ => CompactnessVerdict::Inconclusive,
    };
    Ok(CompactnessDiagnostic { x_list: x_list.to_vec(), tracked, verdict, drift, lambda1_exponent, window_counts, diagnostics })
}
