//! Second-order finite differences for `-y'' + q y` on `[0, X]`.
//!
//! Nodes are `x_i = i h`, `i = 1..N`, `h = X / (N + 1)`. The left end carries
//! `U(y) = A y(0) + B y'(0) = 0`, the right end is Dirichlet. The matrices are
//! tridiagonal and complex symmetric.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::linalg::{DenseMatrix, Tridiagonal};
use crate::potential::Potential;
use crate::scalar::{from_usize, lit, to_f64};
use crate::spectra;
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    x_end: T,
    n: usize,
}

impl<T: Real> Grid<T> {
    pub fn new(x_end: T, n: usize) -> Result<Self> {
        if !(x_end > T::zero() && x_end.is_finite()) {
            return Err(Error::Parameter(format!("grid end must be positive, got {x_end}")));
        }
        if n < 3 {
            return Err(Error::Parameter(format!("need at least 3 interior nodes, got {n}")));
        }
        Ok(Grid { x_end, n })
    }

    pub fn x_end(&self) -> T {
        self.x_end
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> T {
        self.x_end / from_usize(self.n + 1)
    }

    /// `x_i` for `i = 0..=N+1` (0 and N+1 are the boundary points).
    pub fn node(&self, i: usize) -> T {
        self.h() * from_usize(i)
    }

    /// Interior nodes `x_1..x_N`.
    pub fn interior(&self) -> Vec<T> {
        (1..=self.n).map(|i| self.node(i)).collect()
    }
}

/// `U(y) = A y(0) + B y'(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryForm<T> {
    a: Complex<T>,
    b: Complex<T>,
}

impl<T: Real> BoundaryForm<T> {
    pub fn new(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        if a.norm() + b.norm() == T::zero() {
            return Err(Error::Parameter("boundary form needs |A| + |B| > 0".into()));
        }
        Ok(BoundaryForm { a, b })
    }

    pub fn dirichlet() -> Self {
        BoundaryForm { a: Complex::new(T::one(), T::zero()), b: Complex::new(T::zero(), T::zero()) }
    }

    pub fn neumann() -> Self {
        BoundaryForm { a: Complex::new(T::zero(), T::zero()), b: Complex::new(T::one(), T::zero()) }
    }

    pub fn a(&self) -> Complex<T> {
        self.a
    }

    pub fn b(&self) -> Complex<T> {
        self.b
    }

    pub fn is_dirichlet(&self) -> bool {
        self.b.norm() == T::zero()
    }
}

/// Discretized operator: tridiagonal matrix plus provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix<T> {
    matrix: Tridiagonal<T>,
    grid: Grid<T>,
    bc: BoundaryForm<T>,
    potential_id: String,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn tridiagonal(&self) -> &Tridiagonal<T> {
        &self.matrix
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn bc(&self) -> &BoundaryForm<T> {
        &self.bc
    }

    pub fn potential_id(&self) -> &str {
        &self.potential_id
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.matrix.get(i, j)
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.matrix.matvec(x)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        self.matrix.to_dense()
    }

    /// Nonzero entries as `i,j,re,im` lines (0-based, with header row).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,re,im\n");
        let n = self.dim();
        for i in 0..n {
            for j in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                let z = self.get(i, j);
                out.push_str(&format!("{i},{j},{:e},{:e}\n", to_f64(z.re), to_f64(z.im)));
            }
        }
        out
    }

    pub fn header(&self) -> MatrixHeader {
        MatrixHeader {
            n: self.dim(),
            x_end: to_f64(self.grid.x_end),
            h: to_f64(self.grid.h()),
            bc_a: [to_f64(self.bc.a.re), to_f64(self.bc.a.im)],
            bc_b: [to_f64(self.bc.b.re), to_f64(self.bc.b.im)],
            potential_id: self.potential_id.clone(),
        }
    }
}

/// JSON header accompanying a CSV matrix export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub n: usize,
    pub x_end: f64,
    pub h: f64,
    pub bc_a: [f64; 2],
    pub bc_b: [f64; 2],
    pub potential_id: String,
}

/// Value of `q` used on the diagonal at node `x`: the cell average over
/// `[x - h/2, x + h/2]` if `q` jumps strictly inside the cell, the nodal
/// value otherwise.
fn nodal_potential<T: Real>(q: &Potential<T>, x: T, h: T) -> Result<Complex<T>> {
    let half = h * lit(0.5);
    let lo = (x - half).max(T::zero());
    let hi = (x + half).min(q.domain_end());
    if q.breakpoints(lo, hi).is_empty() {
        q.eval(x)
    } else {
        Ok(q.integral(lo, hi)? / (hi - lo))
    }
}

/// Assembles `-y'' + q y` with the boundary form `bc` at 0 and Dirichlet at
/// `grid.x_end()`.
///
/// A non-Dirichlet `bc` is eliminated with the one-sided difference
/// `y'(0) ≈ (y_1 - y_0)/h`, giving `y_0 = B y_1 / (B - A h)`.
pub fn assemble<T: Real>(q: &Potential<T>, grid: &Grid<T>, bc: &BoundaryForm<T>) -> Result<OperatorMatrix<T>> {
    if grid.x_end() > q.domain_end() {
        return Err(Error::Domain(format!(
            "grid reaches {} beyond the potential's domain_end {}",
            grid.x_end(),
            q.domain_end()
        )));
    }
    let n = grid.n();
    let h = grid.h();
    let inv_h2 = T::one() / (h * h);
    let two: T = lit(2.0);
    let mut diag = Vec::with_capacity(n);
    for i in 1..=n {
        let qi = nodal_potential(q, grid.node(i), h)?;
        diag.push(qi + two * inv_h2);
    }
    if !bc.is_dirichlet() {
        let denom = bc.b - bc.a * h;
        if denom.norm() == T::zero() {
            return Err(Error::Degenerate("boundary form B - A h = 0 cannot be eliminated".into()));
        }
        diag[0] -= bc.b / denom * inv_h2;
    }
    let off = vec![Complex::new(-inv_h2, T::zero()); n - 1];
    Ok(OperatorMatrix {
        matrix: Tridiagonal::new(off.clone(), diag, off)?,
        grid: *grid,
        bc: *bc,
        potential_id: q.label().to_string(),
    })
}

/// The `j`-th eigenvalue (1-based, by modulus on the first grid) tracked by
/// continuity through the refinements `n_list`.
///
/// On each new grid the match must be the only eigenvalue within half the
/// isolation distance of the previous one; otherwise
/// [`Error::AmbiguousMatch`] lists what was found.
pub fn refine_study<T: Real>(
    q: &Potential<T>,
    bc: &BoundaryForm<T>,
    x_end: T,
    n_list: &[usize],
    j: usize,
) -> Result<Vec<(usize, Complex<T>)>> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("refine_study needs at least two non-decreasing grid sizes".into()));
    }
    if j == 0 {
        return Err(Error::Parameter("eigenvalue index is 1-based".into()));
    }
    let mut out = Vec::with_capacity(n_list.len());
    let mut prev: Option<(Complex<T>, T)> = None;
    for &n in n_list {
        let m = assemble(q, &Grid::new(x_end, n)?, bc)?;
        let ev = spectra::eigenvalues(&m)?.eigenvalues;
        let lambda = match prev {
            None => *ev.get(j - 1).ok_or_else(|| Error::Parameter(format!("j = {j} exceeds N = {n}")))?,
            Some((target, radius)) => {
                let cands: Vec<Complex<T>> = ev.iter().copied().filter(|z| (z - target).norm() <= radius).collect();
                if cands.len() != 1 {
                    return Err(Error::AmbiguousMatch {
                        target: format!("λ_{j} ≈ {target} at N = {n}"),
                        candidates: cands.iter().map(|z| z.to_string()).collect(),
                    });
                }
                cands[0]
            }
        };
        let isolation = ev
            .iter()
            .filter(|&&z| z != lambda)
            .map(|z| (z - lambda).norm())
            .fold(T::infinity(), T::min);
        prev = Some((lambda, isolation * lit(0.5)));
        out.push((n, lambda));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{named_potential, PieceKind};
    use std::f64::consts::PI;

    fn zero(end: f64) -> Potential<f64> {
        named_potential("zero", &[], Some(end)).unwrap()
    }

    #[test]
    fn free_three_by_three() {
        let m = assemble(&zero(PI), &Grid::new(PI, 3).unwrap(), &BoundaryForm::dirichlet()).unwrap();
        let h = PI / 4.0;
        for i in 0..3 {
            assert!((m.get(i, i).re - 2.0 / (h * h)).abs() < 1e-12);
        }
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!((m.get(0, 1).re + 1.0 / (h * h)).abs() < 1e-12);
        assert_eq!(m.get(0, 2), Complex::new(0.0, 0.0));
        let ev = spectra::eigenvalues(&m).unwrap().eigenvalues;
        assert!((ev[0].re - (2.0 - 2f64.sqrt()) / (h * h)).abs() < 1e-12);
    }

    #[test]
    fn diagonal_perturbation_structure() {
        let grid = Grid::new(PI, 50).unwrap();
        let step = Potential::single(
            PieceKind::Step { amplitude: Complex::new(0.0, 3.0), n: 7, origin: 0.0, length: PI },
            PI,
        )
        .unwrap();
        let a = assemble(&zero(PI), &grid, &BoundaryForm::dirichlet()).unwrap();
        let b = assemble(&step, &grid, &BoundaryForm::dirichlet()).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let d = b.get(i, j) - a.get(i, j);
                if i != j {
                    assert_eq!(d, Complex::new(0.0, 0.0));
                } else {
                    let expected = nodal_potential(&step, grid.node(i + 1), grid.h()).unwrap();
                    assert!((d - expected).norm() < 1e-9);
                    assert!(d.norm() <= 3.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cell_average_across_jump() {
        // r_2 jumps at π/2; pick N so that π/2 falls strictly inside a cell but not on a node
        let grid = Grid::new(PI, 4).unwrap();
        let step = Potential::single(
            PieceKind::Step { amplitude: Complex::new(1.0, 0.0), n: 2, origin: 0.0, length: PI },
            PI,
        )
        .unwrap();
        let m = assemble(&step, &grid, &BoundaryForm::dirichlet()).unwrap();
        let h = grid.h();
        // node x_2 = 2π/5, cell [1.5h, 2.5h] = [0.3π, 0.5π] ends exactly at the jump → nodal value
        assert!((m.get(1, 1).re - 2.0 / (h * h) - 1.0).abs() < 1e-12);
        // node x_3 = 3π/5, cell [0.5π, 0.7π] starts at the jump → nodal value
        assert!((m.get(2, 2).re - 2.0 / (h * h) + 1.0).abs() < 1e-12);
        let grid = Grid::new(PI, 5).unwrap();
        let m = assemble(&step, &grid, &BoundaryForm::dirichlet()).unwrap();
        let h = grid.h();
        // node x_3 = π/2 sits on the jump → average 0
        assert!((m.get(2, 2).re - 2.0 / (h * h)).abs() < 1e-9);
    }

    #[test]
    fn neumann_elimination() {
        let grid = Grid::new(PI, 400).unwrap();
        let m = assemble(&zero(PI), &grid, &BoundaryForm::neumann()).unwrap();
        let h = grid.h();
        assert!((m.get(0, 0).re - 1.0 / (h * h)).abs() < 1e-9);
        // y'(0) = 0, y(π) = 0: eigenvalues (k - 1/2)²
        let ev = spectra::eigenvalues(&m).unwrap().eigenvalues;
        assert!((ev[0].re - 0.25).abs() < 1e-2);
        let bad = BoundaryForm::new(Complex::new(1.0, 0.0), Complex::new(h, 0.0)).unwrap();
        assert!(matches!(assemble(&zero(PI), &grid, &bad), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rejects_grid_beyond_domain() {
        let grid = Grid::new(4.0, 10).unwrap();
        assert!(matches!(assemble(&zero(3.0), &grid, &BoundaryForm::dirichlet()), Err(Error::Domain(_))));
        assert!(Grid::new(1.0, 2).is_err());
        assert!(BoundaryForm::<f64>::new(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn second_order_convergence() {
        let q = zero(PI);
        let r = refine_study(&q, &BoundaryForm::dirichlet(), PI, &[250, 500, 1000], 1).unwrap();
        let err: Vec<f64> = r.iter().map(|(_, l)| (l.re - 1.0).abs()).collect();
        for w in err.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.7..=2.3).contains(&order), "order {order}");
        }
        let again = refine_study(&q, &BoundaryForm::dirichlet(), PI, &[300, 300], 1).unwrap();
        assert_eq!(again[0].1, again[1].1);
    }

    #[test]
    fn export_formats() {
        let m = assemble(&zero(PI), &Grid::new(PI, 3).unwrap(), &BoundaryForm::dirichlet()).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 1 + 7);
        let header = m.header();
        assert_eq!(header.n, 3);
        assert_eq!(header.potential_id, "zero");
    }
}
