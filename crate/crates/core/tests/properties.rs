//! Property-based checks of the invariants that hold for every input.

use std::f64::consts::PI;

use molchanov_core::cauchy::{cauchy_apply, fundamental_system, CoefficientSet};
use molchanov_core::conditions::window_profile_from;
use molchanov_core::counterexample::ln_matrix;
use molchanov_core::discretize::{assemble, BoundaryForm, Grid};
use molchanov_core::linalg::{DenseMatrix, Tridiagonal};
use molchanov_core::potential::{rademacher_integral, Piece, PieceKind, Potential, Weight};
use molchanov_core::spectra::{self, weyl_from_spectra, Resolvent, SpectralSource};
use molchanov_core::{cplx, Complex64};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(re, im)| cplx(re, im))
}

/// Piecewise potential on [0, 10) with 1..5 pieces of polynomial or step kind.
fn potential() -> impl Strategy<Value = Potential<f64>> {
    prop::collection::vec((0.5..3.0f64, prop::collection::vec(complex(), 1..4), any::<bool>(), 1u32..6), 1..5)
        .prop_map(|specs| {
            let total: f64 = specs.iter().map(|s| s.0).sum();
            let mut a = 0.0;
            let mut pieces = Vec::new();
            for (len, coeffs, step, n) in specs {
                let b = a + len * 10.0 / total;
                let kind = if step {
                    PieceKind::Step { amplitude: coeffs[0], n, origin: a, length: b - a }
                } else {
                    PieceKind::Polynomial(coeffs)
                };
                pieces.push(Piece { a, b, kind });
                a = b;
            }
            Potential::new(pieces, 10.0).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn integral_is_additive(q in potential(), pts in prop::collection::vec(0.0..10.0f64, 3)) {
        let mut pts = pts;
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (x, y, z) = (pts[0], pts[1], pts[2]);
        let whole = q.integral(x, z).unwrap();
        let split = q.integral(x, y).unwrap() + q.integral(y, z).unwrap();
        prop_assert!((whole - split).norm() < 1e-9 * (1.0 + whole.norm()));
    }

    #[test]
    fn json_round_trip(q in potential(), x in 0.0..9.99f64) {
        let back = Potential::<f64>::from_json(&q.to_json()).unwrap();
        prop_assert!((back.eval(x).unwrap() - q.eval(x).unwrap()).norm() < 1e-12 * (1.0 + q.eval(x).unwrap().norm()));
    }

    #[test]
    fn windows_tile_and_sum(q in potential(), d in 0.3..2.5f64, off in 0.0..1.0f64) {
        let p = window_profile_from(&q, d, Weight::One, 1e-10, off).unwrap();
        let mut expect_a = off;
        let mut total = 0.0;
        for (k, a, b, m) in p.windows() {
            prop_assert!((a - expect_a).abs() < 1e-12, "window {} starts at {}", k, a);
            prop_assert!((b - a - d).abs() < 1e-12);
            prop_assert!(m >= 0.0);
            expect_a = b;
            total += m;
        }
        prop_assert!(expect_a <= 10.0 + 1e-9 && expect_a + d > 10.0 - 1e-9);
        if !p.is_empty() {
            let direct = q.integrate_abs_power(off, expect_a, Weight::One, 1e-10).unwrap();
            prop_assert!((total - direct).abs() < 1e-7 * (1.0 + direct));
        }
    }

    #[test]
    fn rademacher_integrals_are_small(n in 1u32..200, a in 0.0..PI, b in 0.0..PI) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rademacher_integral::<f64>(n, a, b).abs() <= PI / n as f64 + 1e-12);
    }

    #[test]
    fn weyl_products_on_random_matrices(entries in prop::collection::vec(complex(), 64)) {
        let a = DenseMatrix::from_fn(8, 8, |i, j| entries[8 * i + j]);
        let s = a.singular_values().unwrap();
        let ev = a.eigenvalues().unwrap();
        for k in 1..=8 {
            prop_assert!(weyl_from_spectra(&s, &ev, k).unwrap().pass);
        }
    }

    #[test]
    fn tridiagonal_spectra_match_dense(diag in prop::collection::vec(complex(), 12), off in prop::collection::vec(complex(), 11)) {
        let t = Tridiagonal::new(off.clone(), diag, off).unwrap();
        let dense = t.to_dense();
        let mut fast = molchanov_core::linalg::tridiagonal_eigenvalues(&t).unwrap().eigenvalues;
        let mut slow = dense.eigenvalues().unwrap();
        spectra::sort_by_modulus(&mut fast);
        spectra::sort_by_modulus(&mut slow);
        let scale = dense.norm_frobenius();
        for z in &fast {
            let nearest = slow.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest < 1e-8 * scale, "{} has no dense partner", z);
        }
    }

    #[test]
    fn real_potentials_give_nonnegative_forms(q0 in 0.0..5.0f64, slope in 0.0..2.0f64, coeffs in prop::collection::vec(complex(), 40)) {
        // q ≥ 0 real: ⟨A y, y⟩ ≥ 0 for the Dirichlet matrix
        let q = Potential::single(PieceKind::Polynomial(vec![cplx(q0, 0.0), cplx(slope, 0.0)]), 5.0).unwrap();
        let m = assemble(&q, &Grid::new(5.0, 40).unwrap(), &BoundaryForm::dirichlet()).unwrap();
        let ay = m.matvec(&coeffs);
        let form: Complex64 = ay.iter().zip(&coeffs).map(|(a, y)| a * y.conj()).sum();
        prop_assert!(form.re >= -1e-9 * form.norm().max(1.0));
        prop_assert!(form.im.abs() <= 1e-9 * form.norm().max(1.0));
    }

    #[test]
    fn resolvent_inverts(n in 1u32..20, u in 0.0..6.0f64, rhs in prop::collection::vec(complex(), 60)) {
        let m = ln_matrix(n, u, 60).unwrap();
        let r = Resolvent::inverse(&m).unwrap();
        let x = r.solve(&rhs);
        let back = m.matvec(&x);
        let err = back.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9);
        let s_r = r.singular_values().unwrap();
        let s_a = spectra::singular_values(&m).unwrap();
        prop_assert!((s_r[0] * s_a[s_a.len() - 1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn circles_contain_eigenvalues(n in 1u32..40, u in 0.0..4.0f64) {
        let ev = spectra::eigenvalues(&ln_matrix(n, u, 400).unwrap()).unwrap().eigenvalues;
        for z in ev.iter().filter(|z| z.norm() <= 20.0) {
            let d = (1..=6).map(|j| (z - (j * j) as f64).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d <= u + 0.05, "{} lies {} from the squares", z, d);
        }
    }

    #[test]
    fn wronskian_identity(c0 in complex(), p in prop::collection::vec(complex(), 2), n in 2usize..4) {
        let c = CoefficientSet::constant(n, c0, &p[..n - 1], 2.0).unwrap();
        let fs = fundamental_system(&c, 1.0, 128).unwrap();
        prop_assert!(fs.wronskian_deviation() < 1e-6);
    }

    #[test]
    fn cauchy_is_volterra(c0 in complex(), p in complex(), cut in 1usize..127, bump in complex()) {
        let c = CoefficientSet::constant(2, c0, &[p], 2.0).unwrap();
        let fs = fundamental_system(&c, 1.0, 128).unwrap();
        let g: Vec<Complex64> = fs.x().iter().map(|&x| cplx(x.cos(), x * x)).collect();
        let mut g2 = g.clone();
        g2[cut + 1..].iter_mut().for_each(|z| *z += bump);
        let f = cauchy_apply(&fs, &g).unwrap();
        let f2 = cauchy_apply(&fs, &g2).unwrap();
        for i in 0..=cut {
            prop_assert!((f[i] - f2[i]).norm() <= 1e-14 * (1.0 + f[i].norm()));
        }
    }
}
