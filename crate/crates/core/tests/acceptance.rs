//! End-to-end acceptance run: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use molchanov_core::cauchy::{cauchy_apply, fundamental_system, necessity_experiment, CoefficientSet, NecessityOptions};
use molchanov_core::conditions::{
    molchanov_verdict, theorem4_check, window_profile, MolchanovVerdict,
};
use molchanov_core::counterexample::{
    eigen_convergence, ln_matrix, restricted_resolvent, weak_convergence_check, RESIDUAL_BOUND, S_HAT_THRESHOLD,
};
use molchanov_core::discretize::{assemble, BoundaryForm, Grid};
use molchanov_core::linalg::DenseMatrix;
use molchanov_core::potential::{
    counterexample_potential, named_potential, Piece, PieceKind, Potential, RademacherSchedule, Weight,
};
use molchanov_core::spectra::{
    self, compactness_diagnostic, top_singular_values, weyl_check, weyl_from_spectra, CompactnessVerdict,
    DiagnosticOptions, Resolvent,
};
use molchanov_core::{cplx, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

// ---------- oracles ----------

/// Ai(x) from its Maclaurin series.
fn airy_ai(x: f64) -> f64 {
    let (c1, c2) = (0.355_028_053_887_817_2, 0.258_819_403_792_806_8);
    let x3 = x * x * x;
    let (mut f, mut tf) = (1.0, 1.0);
    let (mut g, mut tg) = (x, x);
    for k in 0..200 {
        let k = k as f64;
        tf *= x3 / ((3.0 * k + 2.0) * (3.0 * k + 3.0));
        tg *= x3 / ((3.0 * k + 3.0) * (3.0 * k + 4.0));
        f += tf;
        g += tg;
        if tf.abs() + tg.abs() < 1e-18 {
            break;
        }
    }
    c1 * f - c2 * g
}

/// `|a_1|`, the first zero of Ai, by bisection.
fn first_airy_zero() -> f64 {
    let (mut lo, mut hi) = (-2.5, -2.2);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if airy_ai(lo) * airy_ai(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    -0.5 * (lo + hi)
}

/// `y(π; λ)` for `-y'' + i u r_n y = λ y`, `y(0) = 0`, `y'(0) = 1`, by exact
/// propagation over the pieces of `r_n`.
fn characteristic(n: u32, u: f64, lambda: Complex64) -> Complex64 {
    let width = PI / n as f64;
    let (mut y, mut dy): (Complex64, Complex64) = (cplx(0.0, 0.0), cplx(1.0, 0.0));
    for j in 0..n {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        let w = (cplx::<f64>(0.0, u * s) - lambda).sqrt();
        let z = w * width;
        let (ch, sh) = (z.cosh(), z.sinh());
        let shw = if w.norm() < 1e-12 { cplx(width, 0.0) } else { sh / w };
        let ny = y * ch + dy * shw;
        let ndy = y * w * sh + dy * ch;
        y = ny;
        dy = ndy;
    }
    y
}

/// Secant refinement of a zero of the characteristic function.
fn continuum_eigenvalue(n: u32, u: f64, guess: Complex64) -> Option<Complex64> {
    let (mut a, mut b) = (guess, guess * (1.0 + 1e-6) + cplx(1e-6, 0.0));
    let (mut fa, mut fb) = (characteristic(n, u, a), characteristic(n, u, b));
    for _ in 0..100 {
        if (fb - fa).norm() == 0.0 {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        a = b;
        fa = fb;
        b = c;
        fb = characteristic(n, u, b);
        if (b - a).norm() < 1e-13 * b.norm().max(1.0) {
            return Some(b);
        }
    }
    None
}

/// `∫_a^b r_n` summed piece by piece.
fn rademacher_oracle(n: u32, a: f64, b: f64) -> f64 {
    let w = PI / n as f64;
    (0..n)
        .map(|j| {
            let lo = (j as f64 * w).max(a);
            let hi = ((j + 1) as f64 * w).min(b);
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if hi > lo { s * (hi - lo) } else { 0.0 }
        })
        .sum()
}

// ---------- criteria ----------

fn c1_free_spectrum() -> Outcome {
    let t = Instant::now();
    let q = named_potential::<f64>("zero", &[], Some(PI)).map_err(err)?;
    let m = assemble(&q, &Grid::new(PI, 2000).map_err(err)?, &BoundaryForm::dirichlet()).map_err(err)?;
    let ev = spectra::eigenvalues(&m).map_err(err)?.eigenvalues;
    let worst = (1..=5).map(|j| (ev[j - 1] - (j * j) as f64).norm() / (j * j) as f64).fold(0.0, f64::max);
    let el = t.elapsed();
    check(
        worst < 1e-3 && el < Duration::from_secs(30),
        format!("max rel err {worst:.2e}, {el:.2?}"),
        format!("max rel err {worst:.2e}, {el:.2?}"),
    )
}

fn c2_migration() -> Outcome {
    let n_list = [2u32, 8, 32, 128];
    let rows = eigen_convergence(2.0, &n_list, 3, 4096).map_err(err)?;
    let mut reported = Vec::new();
    let mut oracle = Vec::new();
    for &n in &n_list {
        let these: Vec<_> = rows.iter().filter(|r| r.n == n).collect();
        reported.push(these.iter().map(|r| r.distance).fold(0.0, f64::max));
        let mut worst = 0.0f64;
        for r in &these {
            let mu = continuum_eigenvalue(n, 2.0, r.lambda).ok_or(format!("oracle did not converge at n={n}"))?;
            if (mu - r.lambda).norm() > 1e-2 {
                return Err(format!("n={n}: discrete {} vs continuum {mu}", r.lambda));
            }
            let nearest = (1..=6).map(|j| (mu - (j * j) as f64).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
        oracle.push(worst);
    }
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    check(
        monotone(&reported) && monotone(&oracle) && reported[3] < 0.1 && oracle[3] < 0.1,
        format!("max dist {}; continuum oracle {}", fmt(&reported), fmt(&oracle)),
        format!("max dist {}; continuum oracle {}", fmt(&reported), fmt(&oracle)),
    )
}

fn c3_circles() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for u in [1.0, 2.0, 5.0] {
        for n in [16u32, 64] {
            let ev = spectra::eigenvalues(&ln_matrix(n, u, 2048).map_err(err)?).map_err(err)?.eigenvalues;
            for z in ev.iter().filter(|z| z.norm() <= 30.0) {
                let d = (1..=8).map(|j| (z - (j * j) as f64).norm()).fold(f64::INFINITY, f64::min);
                worst = worst.max(d - u);
            }
        }
    }
    check(
        worst <= 0.05,
        format!("max dist(λ, j²) - u = {worst:.3e}"),
        format!("max dist(λ, j²) - u = {worst:.3e} > 0.05"),
    )
}

fn c4_resolvent_bound() -> Outcome {
    let mut s = Vec::new();
    for u in [1.0, 5.0] {
        let m = ln_matrix(16, u, 2048).map_err(err)?;
        let r = Resolvent::inverse(&m).map_err(err)?;
        s.push(top_singular_values(&r, 1).map_err(err)?[0].value);
    }
    check(s.iter().all(|&v| v <= 1.0 + 5e-3), format!("s1 = {s:.6?}"), format!("s1 = {s:.6?}"))
}

fn c5_weyl() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut failures = 0;
    for _ in 0..200 {
        let a = DenseMatrix::<f64>::from_fn(20, 20, |_, _| {
            cplx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let s = a.singular_values().map_err(err)?;
        let ev = a.eigenvalues().map_err(err)?;
        for k in 1..=3 {
            if !weyl_from_spectra(&s, &ev, k).map_err(err)?.pass {
                failures += 1;
            }
        }
    }
    let operator_failures: Vec<usize> = [2u32, 8, 32, 128]
        .par_iter()
        .map(|&n| {
            let m = ln_matrix(n, 2.0, 4096).map_err(err)?;
            let mut bad = 0;
            for k in 1..=3 {
                if !weyl_check(&m, k).map_err(err)?.pass {
                    bad += 1;
                }
            }
            Ok(bad)
        })
        .collect::<Result<_, String>>()?;
    failures += operator_failures.iter().sum::<usize>();
    check(
        failures == 0,
        "200 random 20x20 + 4 operator matrices, k = 1..3".into(),
        format!("{failures} violations"),
    )
}

fn c6_witness() -> Outcome {
    let t = Instant::now();
    let mut n = 2u32;
    while n <= 512 {
        let rr = restricted_resolvent(n, 5.0, 2048).map_err(err)?;
        let w = &rr.witness;
        let ok = rr.s_hat > S_HAT_THRESHOLD
            && (w.norm - 1.0).abs() <= 1e-10
            && w.boundary_max() <= 10.0 * w.h
            && w.residual < RESIDUAL_BOUND;
        if ok {
            let el = t.elapsed();
            return check(
                el < Duration::from_secs(300),
                format!(
                    "n = {n}: ŝ = {:.4}, residual = {:.3}, boundary max = {:.1e} (10h = {:.1e}), {el:.2?}",
                    rr.s_hat,
                    w.residual,
                    w.boundary_max(),
                    10.0 * w.h
                ),
                format!("too slow: {el:.2?}"),
            );
        }
        n *= 2;
    }
    Err("no n ≤ 512 produced an admissible witness".into())
}

fn c7_profiles() -> Outcome {
    let linear = named_potential::<f64>("linear", &[], Some(20.0)).map_err(err)?;
    let p = window_profile(&linear, 1.0, Weight::One, 1e-12).map_err(err)?;
    let e_lin = p.windows().map(|(k, _, _, m)| (m - (k as f64 - 0.5)).abs()).fold(0.0, f64::max);
    let sched = RademacherSchedule::new(vec![2, 4, 8, 16, 32]).map_err(err)?;
    let ce: Potential<f64> = counterexample_potential(&sched).map_err(err)?;
    let p = window_profile(&ce, PI, Weight::One, 1e-12).map_err(err)?;
    let e_ce = p.windows().map(|(k, _, _, m)| (m - PI * k as f64).abs()).fold(0.0, f64::max);
    let one = named_potential::<f64>("constant", &[1.0], Some(20.0)).map_err(err)?;
    let v = molchanov_verdict(&window_profile(&one, 1.0, Weight::One, 1e-12).map_err(err)?, 0.25, 2.0).map_err(err)?;
    let witness = matches!(v, MolchanovVerdict::FailsWithWitness(_));
    check(
        e_lin <= 1e-9 && e_ce <= 1e-9 && witness,
        format!("x: err {e_lin:.1e}; counterexample: err {e_ce:.1e}; q≡1: {v:?}"),
        format!("x: err {e_lin:.1e}; counterexample: err {e_ce:.1e}; q≡1: {v:?}"),
    )
}

fn c8_diagnostic() -> Outcome {
    let xs = [20.0, 30.0, 40.0];
    let dir = BoundaryForm::dirichlet();
    let opts = DiagnosticOptions::default();
    let airy = first_airy_zero();
    let lin = named_potential::<f64>("linear", &[], Some(40.0)).map_err(err)?;
    let d1 = compactness_diagnostic(&lin, &dir, &xs, 2, opts).map_err(err)?;
    let lam1 = d1.tracked.last().ok_or("no eigenvalues")?[0];
    let zero = named_potential::<f64>("zero", &[], Some(40.0)).map_err(err)?;
    let d2 = compactness_diagnostic(&zero, &dir, &xs, 2, opts).map_err(err)?;
    let mx2 = named_potential::<f64>("minus_x_squared", &[], Some(40.0)).map_err(err)?;
    let d3 = compactness_diagnostic(&mx2, &dir, &xs, 2, opts).map_err(err)?;
    let counts_grow = d3.window_counts.windows(2).all(|w| w[1] > w[0]);
    let ok = d1.verdict == CompactnessVerdict::StabilizesCompactLike
        && (lam1 - airy).norm() <= 1e-3
        && d2.verdict == CompactnessVerdict::CollapsesOrPlateausNoncompactLike
        && d2.lambda1_exponent < -1.5
        && d3.verdict == CompactnessVerdict::CollapsesOrPlateausNoncompactLike
        && counts_grow;
    let msg = format!(
        "x: {:?}, λ1 = {:.6} (Airy {airy:.6}); 0: exponent {:.2}; -x²: counts {:?}",
        d1.verdict, lam1.re, d2.lambda1_exponent, d3.window_counts
    );
    check(ok, msg.clone(), msg)
}

fn c9_theorem4() -> Outcome {
    let q = Potential::single(PieceKind::Polynomial(vec![cplx(1.0, 0.0), cplx(1.0, 0.0)]), 50.0).map_err(err)?;
    let r = theorem4_check(&q, 0.0, PI / 2.0, 0.9, 0.01).map_err(err)?;
    let c0 = 0.1 * (PI / 4.0).sin();
    let ix = named_potential::<f64>("i_times_x", &[], Some(50.0)).map_err(err)?;
    let r2 = theorem4_check(&ix, 1.0, 3.0 * PI / 4.0, 0.5, 0.01).map_err(err)?;
    let ok = r.pass && r.rho_min_ratio >= c0 - 1e-9 && !r2.pass && r2.max_arg_excess > 0.0;
    let msg = format!(
        "x+1: pass {}, ρ/|p| ≥ {:.6} (C0 = {c0:.6}); ix: pass {}, arg excess {:.4}",
        r.pass, r.rho_min_ratio, r2.pass, r2.max_arg_excess
    );
    check(ok, msg.clone(), msg)
}

fn c10_cauchy() -> Outcome {
    let mut worst_w = 0.0f64;
    for c0 in [cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 1.0)] {
        for n in [2usize, 3] {
            let step = Potential::new(
                vec![
                    Piece { a: 0.0, b: 0.4, kind: PieceKind::constant(cplx(2.0, -1.0)) },
                    Piece { a: 0.4, b: 2.0, kind: PieceKind::Polynomial(vec![cplx(0.0, 0.0), cplx(0.0, 3.0)]) },
                ],
                2.0,
            )
            .map_err(err)?;
            let mut p = vec![step];
            p.extend((3..=n).map(|_| Potential::single(PieceKind::constant(cplx(0.5, 0.5)), 2.0).unwrap()));
            let fs = fundamental_system(&CoefficientSet::new(n, c0, p).map_err(err)?, 1.0, 256).map_err(err)?;
            for (&x, &w) in fs.x().iter().zip(fs.wronskian()) {
                worst_w = worst_w.max((w - (-c0 * x).exp()).norm());
            }
        }
    }
    let zero = CoefficientSet::constant(2, cplx(0.0, 0.0), &[cplx(0.0, 0.0)], 2.0).map_err(err)?;
    let fs = fundamental_system(&zero, 1.0, 256).map_err(err)?;
    let ones = vec![cplx(1.0, 0.0); 257];
    let f = cauchy_apply(&fs, &ones).map_err(err)?;
    let worst_f = fs.x().iter().zip(&f).map(|(&x, y)| (y - x * x / 2.0).norm()).fold(0.0, f64::max);
    let osc = CoefficientSet::constant(3, cplx(1.0, 1.0), &[cplx(2.0, 0.0), cplx(0.0, 1.0)], 2.0).map_err(err)?;
    let fs = fundamental_system(&osc, 1.0, 256).map_err(err)?;
    let g: Vec<Complex64> = fs.x().iter().map(|&x: &f64| cplx(x.sin(), x)).collect();
    let base = cauchy_apply(&fs, &g).map_err(err)?;
    let mut worst_v = 0.0f64;
    for cut in [10usize, 128, 200] {
        let mut g2 = g.clone();
        g2.iter_mut().skip(cut + 1).for_each(|z| *z += cplx(5.0, -3.0));
        let f2 = cauchy_apply(&fs, &g2).map_err(err)?;
        worst_v = worst_v.max(base[..=cut].iter().zip(&f2[..=cut]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
    }
    let msg = format!("|W - e^(-ξC0)| ≤ {worst_w:.1e}; |f - x²/2| ≤ {worst_f:.1e}; locality {worst_v:.1e}");
    check(worst_w <= 1e-6 && worst_f <= 1e-8 && worst_v <= 1e-14, msg.clone(), msg)
}

fn c11_necessity() -> Outcome {
    let c = CoefficientSet::constant(2, cplx(0.0, 0.0), &[cplx(1.0, 0.0)], 40.0).map_err(err)?;
    let starts: Vec<f64> = (0..10).map(|k| 2.0 * k as f64 + 0.5).collect();
    let rep = necessity_experiment(&starts, 1.0, &c, &NecessityOptions::default()).map_err(err)?;
    let norms_ok = rep.windows.iter().all(|w| w.failure.is_none() && (w.norm - 1.0).abs() <= 1e-10);
    let spread = rep.residual_spread();
    let n_list = [4u32, 16, 64];
    let vals = weak_convergence_check::<f64>(&n_list, 0.3, 2.0).map_err(err)?;
    let weak_ok = n_list.iter().zip(&vals).all(|(&n, &v)| {
        (v - rademacher_oracle(n, 0.3, 2.0).abs()).abs() < 1e-12 && v <= 2.0 * PI / n as f64
    });
    let msg = format!(
        "10 windows, residual spread {spread:.6}, max {:.4}; |∫ r_n| = {}",
        rep.residual_max,
        fmt(&vals)
    );
    check(norms_ok && spread <= 1.5 && weak_ok, msg.clone(), msg)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("free-operator spectrum", c1_free_spectrum),
        ("eigenvalue migration", c2_migration),
        ("circle containment", c3_circles),
        ("discrete resolvent bound", c4_resolvent_bound),
        ("Weyl product inequality", c5_weyl),
        ("restricted resolvent and witness", c6_witness),
        ("Molchanov profiles", c7_profiles),
        ("compactness diagnostic tri-test", c8_diagnostic),
        ("sectorial hypothesis checker", c9_theorem4),
        ("Cauchy machinery", c10_cauchy),
        ("necessity experiment", c11_necessity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match f() {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{:.1?}]", i + 1, t.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{:.1?}]", i + 1, t.elapsed());
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
