//! Window profiles, sector classification and the smooth-sector hypothesis
//! checker, all evaluated on truncated data.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::potential::{Potential, Weight};
use crate::scalar::{from_usize, lit};
use crate::{Error, Real, Result};

/// `m_k = ∫_{a_k}^{a_k + d} |q|^w`, `a_k = offset + (k-1) d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowProfile<T> {
    pub d: T,
    pub weight: Weight,
    pub offset: T,
    pub m: Vec<T>,
}

impl<T: Real> WindowProfile<T> {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// `(k, a_k, b_k, m_k)` with `k` starting at 1.
    pub fn windows(&self) -> impl Iterator<Item = (usize, T, T, T)> + '_ {
        self.m.iter().enumerate().map(move |(i, &m)| {
            let a = self.offset + self.d * from_usize(i);
            (i + 1, a, a + self.d, m)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,a,b,m_k\n");
        for (k, a, b, m) in self.windows() {
            out.push_str(&format!("{k},{a},{b},{m}\n"));
        }
        out
    }
}

/// Contiguous windows of length `d` from 0.
pub fn window_profile<T: Real>(q: &Potential<T>, d: T, w: Weight, tol: T) -> Result<WindowProfile<T>> {
    window_profile_from(q, d, w, tol, T::zero())
}

/// Contiguous windows of length `d` starting at `offset`; as many as fit in
/// `[offset, X]` (a window ending within rounding of `X` counts).
pub fn window_profile_from<T: Real>(q: &Potential<T>, d: T, w: Weight, tol: T, offset: T) -> Result<WindowProfile<T>> {
    let x_end = q.domain_end();
    if !(d > T::zero() && d <= x_end) {
        return Err(Error::Parameter(format!("window length must lie in (0, {x_end}], got {d}")));
    }
    if !(offset >= T::zero() && offset < x_end) {
        return Err(Error::Parameter(format!("offset must lie in [0, {x_end}), got {offset}")));
    }
    if !(tol > T::zero()) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let ratio = (x_end - offset) / d;
    let count = (ratio * (T::one() + lit::<T>(64.0) * T::epsilon())).floor().to_usize().unwrap_or(0);
    let m = (0..count)
        .into_par_iter()
        .map(|i| {
            let a = offset + d * from_usize(i);
            let b = (a + d).min(x_end);
            q.integrate_abs_power(a, b, w, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WindowProfile { d, weight: w, offset, m })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum MolchanovVerdict {
    DivergesLikely,
    /// 1-based window indices whose integrals stay bounded.
    FailsWithWitness(Vec<usize>),
    Inconclusive,
}

/// Three-valued reading of a profile.
///
/// With `head` the first half of the windows and `tail` the last
/// `tail_fraction` of them:
/// * `FailsWithWitness` if at least two tail windows have `m_k ≤ min(head)`;
/// * `DivergesLikely` if `min(tail) > 0` and `min(tail) ≥ growth_factor · min(head)`;
/// * `Inconclusive` otherwise.
pub fn molchanov_verdict<T: Real>(profile: &WindowProfile<T>, tail_fraction: T, growth_factor: T) -> Result<MolchanovVerdict> {
    let k = profile.len();
    if k == 0 {
        return Err(Error::Parameter("empty window profile".into()));
    }
    if !(tail_fraction > T::zero() && tail_fraction < T::one()) {
        return Err(Error::Parameter(format!("tail_fraction must lie in (0, 1), got {tail_fraction}")));
    }
    if !(growth_factor > T::one()) {
        return Err(Error::Parameter(format!("growth_factor must exceed 1, got {growth_factor}")));
    }
    let head_len = k.div_ceil(2);
    let tail_len = (tail_fraction * from_usize(k)).ceil().to_usize().unwrap_or(1).clamp(1, k);
    let tail_start = k - tail_len;
    let head_min = profile.m[..head_len].iter().copied().fold(T::infinity(), T::min);
    let tail = &profile.m[tail_start..];
    let witness: Vec<usize> = tail
        .iter()
        .enumerate()
        .filter(|(_, &m)| m <= head_min)
        .map(|(i, _)| tail_start + i + 1)
        .collect();
    if witness.len() >= 2 {
        return Ok(MolchanovVerdict::FailsWithWitness(witness));
    }
    let tail_min = tail.iter().copied().fold(T::infinity(), T::min);
    if tail_min > T::zero() && tail_min >= growth_factor * head_min {
        Ok(MolchanovVerdict::DivergesLikely)
    } else {
        Ok(MolchanovVerdict::Inconclusive)
    }
}

/// Verdict for the best window system among offsets `j·d/8`, `j = 0..8`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MolchanovSearch<T> {
    pub verdict: MolchanovVerdict,
    /// Offset of the system that produced the verdict.
    pub offset: T,
    pub profile: WindowProfile<T>,
}

/// Scans offset-anchored contiguous systems. A witness at any offset wins;
/// `DivergesLikely` requires it at every offset.
pub fn molchanov_search<T: Real>(
    q: &Potential<T>,
    d: T,
    w: Weight,
    tol: T,
    tail_fraction: T,
    growth_factor: T,
) -> Result<MolchanovSearch<T>> {
    let mut results = Vec::with_capacity(8);
    for j in 0..8 {
        let offset = d * from_usize(j) / lit(8.0);
        if offset >= q.domain_end() {
            break;
        }
        let profile = window_profile_from(q, d, w, tol, offset)?;
        if profile.is_empty() {
            continue;
        }
        let verdict = molchanov_verdict(&profile, tail_fraction, growth_factor)?;
        if matches!(verdict, MolchanovVerdict::FailsWithWitness(_)) {
            return Ok(MolchanovSearch { verdict, offset, profile });
        }
        results.push((verdict, offset, profile));
    }
    let all_diverge = results.iter().all(|(v, _, _)| *v == MolchanovVerdict::DivergesLikely);
    let (verdict, offset, profile) = results.into_iter().next().ok_or_else(|| Error::Parameter("no window fits".into()))?;
    let verdict = if all_diverge { verdict } else { MolchanovVerdict::Inconclusive };
    Ok(MolchanovSearch { verdict, offset, profile })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SectorVerdict {
    Sectorial,
    RMinusOnly,
    Fails,
}

#[derive(Clone, Debug, Serialize)]
pub struct SectorClassification<T> {
    pub verdict: SectorVerdict,
    pub alpha_hat: T,
    pub beta_hat: T,
    pub q0: Complex<T>,
    pub x0: T,
    pub margin: T,
    /// Samples with `q(x) - q0` on the negative real axis.
    pub branch_cut_hits: usize,
}

/// Fits the narrowest sector `α̂ ≤ arg(q - q0) ≤ β̂` over the samples
/// `x = i·grid_step ≥ x0` and classifies it; the candidate `q0` with the
/// smallest opening wins. The grid is anchored at 0, so a larger sampled
/// range never produces a narrower sector.
pub fn classify_sector<T: Real>(
    q: &Potential<T>,
    q0_candidates: &[Complex<T>],
    x0: T,
    grid_step: T,
) -> Result<SectorClassification<T>> {
    if !(grid_step > T::zero()) {
        return Err(Error::Parameter("grid_step must be positive".into()));
    }
    if !(x0 >= T::zero() && x0 < q.domain_end()) {
        return Err(Error::Parameter(format!("x0 must lie in [0, {})", q.domain_end())));
    }
    if q0_candidates.is_empty() {
        return Err(Error::Parameter("need at least one q0 candidate".into()));
    }
    let first = (x0 / grid_step).ceil().to_usize().unwrap_or(0);
    let mut samples = Vec::new();
    let mut i = first;
    loop {
        let x = grid_step * from_usize(i);
        if x >= q.domain_end() {
            break;
        }
        if x >= x0 {
            samples.push(q.eval(x)?);
        }
        i += 1;
    }
    let mut best: Option<SectorClassification<T>> = None;
    for &q0 in q0_candidates {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        let mut hits = 0usize;
        let mut used = 0usize;
        for z in &samples {
            let v = z - q0;
            if v.norm() == T::zero() {
                continue;
            }
            used += 1;
            // principal argument in (-π, π]; both signed zeros land on π
            let arg = if v.im == T::zero() && v.re < T::zero() { T::PI() } else { v.arg() };
            if arg >= T::PI() {
                hits += 1;
                continue;
            }
            lo = lo.min(arg);
            hi = hi.max(arg);
        }
        if used == 0 {
            continue;
        }
        let (verdict, lo, hi) = if hits > 0 {
            (SectorVerdict::Fails, lo.min(T::PI()), T::PI())
        } else if hi - lo < T::PI() {
            (SectorVerdict::Sectorial, lo, hi)
        } else {
            (SectorVerdict::RMinusOnly, lo, hi)
        };
        let cand = SectorClassification { verdict, alpha_hat: lo, beta_hat: hi, q0, x0, margin: hi - lo, branch_cut_hits: hits };
        let better = match &best {
            None => true,
            Some(b) => {
                let rank = |v: SectorVerdict| if v == SectorVerdict::Fails { 1 } else { 0 };
                (rank(cand.verdict), cand.margin) < (rank(b.verdict), b.margin)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| Error::Degenerate("every sample coincides with every q0 candidate".into()))
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem4Report<T> {
    pub kappa: T,
    pub delta: T,
    pub x0: T,
    pub min_modulus: T,
    pub max_arg_excess: T,
    pub max_ratio: T,
    pub rho_min_ratio: T,
    pub c0: T,
    pub samples: usize,
    pub pass: bool,
}

/// Samples `|q| ≥ 1`, `|arg q| < π - κ` and `|q'/q^{3/2}| < 4δ sin(κ/2)` on
/// `x = x0 + i·grid_step < X`, together with
/// `ρ/|p| = (Re p - ¼|q'/q|)/|p|` for the continuous branch `p = √q`
/// started from the principal root at `x0`.
pub fn theorem4_check<T: Real>(q: &Potential<T>, x0: T, kappa: T, delta: T, grid_step: T) -> Result<Theorem4Report<T>> {
    if !(kappa > T::zero() && kappa < T::PI()) {
        return Err(Error::Parameter(format!("κ must lie in (0, π), got {kappa}")));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::Parameter(format!("δ must lie in (0, 1), got {delta}")));
    }
    if !(grid_step > T::zero()) {
        return Err(Error::Parameter("grid_step must be positive".into()));
    }
    if !(x0 >= T::zero() && x0 < q.domain_end()) {
        return Err(Error::Parameter(format!("x0 must lie in [0, {})", q.domain_end())));
    }
    let quarter: T = lit(0.25);
    let mut min_modulus = T::infinity();
    let mut max_arg_excess = T::neg_infinity();
    let mut max_ratio = T::zero();
    let mut rho_min_ratio = T::infinity();
    let mut p_prev: Option<Complex<T>> = None;
    let mut samples = 0usize;
    let mut i = 0usize;
    loop {
        let x = x0 + grid_step * from_usize(i);
        if x >= q.domain_end() {
            break;
        }
        i += 1;
        let qv = q.eval(x)?;
        let dq = q.derivative(x)?;
        let modulus = qv.norm();
        if modulus == T::zero() {
            return Err(Error::Degenerate(format!("q vanishes at x = {x}; √q has no branch there")));
        }
        let mut p = qv.sqrt();
        if let Some(prev) = p_prev {
            if (p - prev).norm() > (p + prev).norm() {
                p = -p;
            }
        }
        p_prev = Some(p);
        min_modulus = min_modulus.min(modulus);
        max_arg_excess = max_arg_excess.max(qv.arg().abs() - (T::PI() - kappa));
        let ratio = dq.norm() / (modulus * modulus.sqrt());
        max_ratio = max_ratio.max(ratio);
        let rho = p.re - quarter * dq.norm() / modulus;
        rho_min_ratio = rho_min_ratio.min(rho / p.norm());
        samples += 1;
    }
    let half_kappa_sin = (kappa * lit(0.5)).sin();
    let pass = min_modulus >= T::one()
        && max_arg_excess < T::zero()
        && max_ratio < lit::<T>(4.0) * delta * half_kappa_sin;
    Ok(Theorem4Report {
        kappa,
        delta,
        x0,
        min_modulus,
        max_arg_excess,
        max_ratio,
        rho_min_ratio,
        c0: (T::one() - delta) * half_kappa_sin,
        samples,
        pass,
    })
}
