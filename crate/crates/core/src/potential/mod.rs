//! Piecewise complex potentials on a truncated half-line `[0, X)`.
//!
//! A [`Potential`] is an ordered list of half-open pieces covering `[0, X)`.
//! Piece kinds are chosen so that every potential is locally integrable and
//! the integrals the rest of the crate needs are either closed-form (steps,
//! constants, complex integrals of polynomials) or reduce to adaptive
//! quadrature of a smooth integrand (`|p(x)|^w` on polynomial pieces).

mod json;
mod rademacher;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::quadrature;
use crate::scalar::{from_usize, lit};
use crate::{Error, Real, Result};

pub use json::{KindFile, PieceFile, PotentialFile};
pub use rademacher::{rademacher_integral, rademacher_primitive, rademacher_step, weak_convergence_check};

/// Exponent `w` in `∫ |q|^w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weight {
    /// `|q|`, the classical window integral.
    One,
    /// `|q|^{1/2}`, the variant used for potentials in a wide sector.
    Half,
}

impl Weight {
    pub fn apply<T: Real>(self, modulus: T) -> T {
        match self {
            Weight::One => modulus,
            Weight::Half => modulus.sqrt(),
        }
    }

    pub fn exponent(self) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Half => 0.5,
        }
    }

    pub fn from_exponent(w: f64) -> Result<Self> {
        if w == 1.0 {
            Ok(Weight::One)
        } else if w == 0.5 {
            Ok(Weight::Half)
        } else {
            Err(Error::Parameter(format!("weight exponent must be 1 or 1/2, got {w}")))
        }
    }
}

/// Which one-sided value to take at a breakpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Functional form of one piece, always in the absolute coordinate `x`.
#[derive(Clone, Debug, PartialEq)]
pub enum PieceKind<T> {
    /// `Σ c_k x^k`.
    Polynomial(Vec<Complex<T>>),
    /// `amplitude · r_n(π (x - origin) / length)`, the alternating ±1 step with
    /// `n` equal subintervals on `[origin, origin + length)`.
    Step {
        amplitude: Complex<T>,
        n: u32,
        origin: T,
        length: T,
    },
    /// `scale · base(x - shift)`.
    Scaled {
        scale: Complex<T>,
        shift: T,
        base: Box<PieceKind<T>>,
    },
}

impl<T: Real> PieceKind<T> {
    pub fn constant(c: Complex<T>) -> Self {
        PieceKind::Polynomial(vec![c])
    }

    fn validate(&self, a: T, b: T) -> Result<()> {
        match self {
            PieceKind::Polynomial(c) => {
                if c.is_empty() {
                    return Err(Error::Format("polynomial piece without coefficients".into()));
                }
                if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Format("non-finite polynomial coefficient".into()));
                }
            }
            PieceKind::Step { amplitude, n, origin, length } => {
                if *n == 0 {
                    return Err(Error::Format("step piece needs n >= 1".into()));
                }
                if !(*length > T::zero()) || !amplitude.re.is_finite() || !amplitude.im.is_finite() {
                    return Err(Error::Format("step piece needs a finite amplitude and positive length".into()));
                }
                let slack = T::epsilon() * lit(64.0) * (T::one() + origin.abs() + *length);
                if a < *origin - slack || b > *origin + *length + slack {
                    return Err(Error::Format(format!(
                        "step piece [{a}, {b}) exceeds its period [{origin}, {})",
                        *origin + *length
                    )));
                }
            }
            PieceKind::Scaled { scale, shift, base } => {
                if !scale.re.is_finite() || !scale.im.is_finite() || !shift.is_finite() {
                    return Err(Error::Format("non-finite scale or shift".into()));
                }
                base.validate(a - *shift, b - *shift)?;
            }
        }
        Ok(())
    }

    fn step_index(n: u32, origin: T, length: T, x: T, side: Side) -> usize {
        let t = (x - origin) / length * T::PI();
        let width = T::PI() / from_usize::<T>(n as usize);
        let mut j = (t / width).floor().to_isize().unwrap_or(0);
        // snap computed breakpoints onto the half-open convention
        if t >= width * lit((j + 1) as f64) {
            j += 1;
        }
        if t < width * lit(j as f64) {
            j -= 1;
        }
        if side == Side::Left && j > 0 && t == width * lit(j as f64) {
            j -= 1;
        }
        j.clamp(0, n as isize - 1) as usize
    }

    /// Value at `x`; `side` selects the one-sided limit at jumps.
    pub fn value(&self, x: T, side: Side) -> Complex<T> {
        match self {
            PieceKind::Polynomial(c) => {
                let xc = Complex::new(x, T::zero());
                c.iter().rev().fold(Complex::new(T::zero(), T::zero()), |acc, &ck| acc * xc + ck)
            }
            PieceKind::Step { amplitude, n, origin, length } => {
                let j = Self::step_index(*n, *origin, *length, x, side);
                if j % 2 == 0 {
                    *amplitude
                } else {
                    -*amplitude
                }
            }
            PieceKind::Scaled { scale, shift, base } => *scale * base.value(x - *shift, side),
        }
    }

    /// Classical derivative away from jumps.
    pub fn derivative(&self, x: T) -> Complex<T> {
        match self {
            PieceKind::Polynomial(c) => {
                let xc = Complex::new(x, T::zero());
                c.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (k, &ck)| acc * xc + ck * from_usize::<T>(k))
            }
            PieceKind::Step { .. } => Complex::new(T::zero(), T::zero()),
            PieceKind::Scaled { scale, shift, base } => *scale * base.derivative(x - *shift),
        }
    }

    /// Exact `∫_a^b q dx` over a subinterval of the piece.
    pub fn integral(&self, a: T, b: T) -> Complex<T> {
        match self {
            PieceKind::Polynomial(c) => {
                let prim = |x: T| {
                    let xc = Complex::new(x, T::zero());
                    c.iter()
                        .enumerate()
                        .rev()
                        .fold(Complex::new(T::zero(), T::zero()), |acc, (k, &ck)| {
                            acc * xc + ck / from_usize::<T>(k + 1)
                        })
                        * xc
                };
                prim(b) - prim(a)
            }
            PieceKind::Step { amplitude, n, origin, length } => {
                let to_t = |x: T| ((x - *origin) / *length * T::PI()).max(T::zero()).min(T::PI());
                let ta = to_t(a);
                let tb = to_t(b);
                *amplitude * (rademacher_integral(*n, ta, tb) * *length / T::PI())
            }
            PieceKind::Scaled { scale, shift, base } => *scale * base.integral(a - *shift, b - *shift),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            PieceKind::Polynomial(c) => c.iter().skip(1).all(|z| z.re == T::zero() && z.im == T::zero()),
            PieceKind::Step { .. } => false,
            PieceKind::Scaled { base, .. } => base.is_constant(),
        }
    }

    /// `∫_a^b |q|^w dx`: closed form on constants and steps (where `|q|` is
    /// constant), adaptive quadrature otherwise.
    pub fn abs_power_integral(&self, a: T, b: T, w: Weight, tol: T) -> Result<T> {
        match self {
            PieceKind::Polynomial(c) if self.is_constant() => Ok(w.apply(c[0].norm()) * (b - a)),
            PieceKind::Polynomial(_) => {
                let est = quadrature::integrate(|x| w.apply(self.value(x, Side::Right).norm()), a, b, tol)?;
                Ok(est.value)
            }
            PieceKind::Step { amplitude, .. } => Ok(w.apply(amplitude.norm()) * (b - a)),
            PieceKind::Scaled { scale, shift, base } => {
                let factor = w.apply(scale.norm());
                if factor == T::zero() {
                    return Ok(T::zero());
                }
                Ok(factor * base.abs_power_integral(a - *shift, b - *shift, w, tol / factor)?)
            }
        }
    }

    /// Jump locations strictly inside `(a, b)`.
    pub fn jumps(&self, a: T, b: T) -> Vec<T> {
        match self {
            PieceKind::Polynomial(_) => Vec::new(),
            PieceKind::Step { n, origin, length, .. } => (1..*n)
                .map(|j| *origin + *length * from_usize::<T>(j as usize) / from_usize::<T>(*n as usize))
                .filter(|&x| x > a && x < b)
                .collect(),
            PieceKind::Scaled { shift, base, .. } => {
                base.jumps(a - *shift, b - *shift).into_iter().map(|x| x + *shift).collect()
            }
        }
    }
}

/// One half-open piece `[a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece<T> {
    pub a: T,
    pub b: T,
    pub kind: PieceKind<T>,
}

/// A complex potential on `[0, domain_end)`, piecewise defined.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential<T> {
    pieces: Vec<Piece<T>>,
    domain_end: T,
    label: String,
}

impl<T: Real> Potential<T> {
    /// Validates coverage of `[0, domain_end)` by sorted, gap-free pieces.
    ///
    /// Adjacent endpoints that disagree by rounding only (relative `1e-12`)
    /// are snapped together.
    pub fn new(mut pieces: Vec<Piece<T>>, domain_end: T) -> Result<Self> {
        if !(domain_end > T::zero()) || !domain_end.is_finite() {
            return Err(Error::Format(format!("domain_end must be positive, got {domain_end}")));
        }
        if pieces.is_empty() {
            return Err(Error::Format("a potential needs at least one piece".into()));
        }
        let snap = lit::<T>(1e-12) * (T::one() + domain_end);
        if pieces[0].a.abs() > snap {
            return Err(Error::Format(format!("first piece starts at {} instead of 0", pieces[0].a)));
        }
        pieces[0].a = T::zero();
        for i in 1..pieces.len() {
            let prev_b = pieces[i - 1].b;
            if (pieces[i].a - prev_b).abs() > snap {
                return Err(Error::Format(format!(
                    "pieces {} and {} leave a gap or overlap ({} vs {})",
                    i - 1,
                    i,
                    prev_b,
                    pieces[i].a
                )));
            }
            pieces[i].a = prev_b;
        }
        let last = pieces.len() - 1;
        if (pieces[last].b - domain_end).abs() > snap {
            return Err(Error::Format(format!(
                "pieces end at {} but domain_end is {}",
                pieces[last].b, domain_end
            )));
        }
        pieces[last].b = domain_end;
        for p in &pieces {
            if !(p.b > p.a) {
                return Err(Error::Format(format!("empty or reversed piece [{}, {})", p.a, p.b)));
            }
            p.kind.validate(p.a, p.b)?;
        }
        Ok(Potential { pieces, domain_end, label: "custom".into() })
    }

    /// Single-piece potential `kind` on `[0, domain_end)`.
    pub fn single(kind: PieceKind<T>, domain_end: T) -> Result<Self> {
        Self::new(vec![Piece { a: T::zero(), b: domain_end, kind }], domain_end)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn pieces(&self) -> &[Piece<T>] {
        &self.pieces
    }

    pub fn domain_end(&self) -> T {
        self.domain_end
    }

    fn piece_index(&self, x: T) -> usize {
        self.pieces.partition_point(|p| p.a <= x).saturating_sub(1)
    }

    /// `q(x)` for `0 ≤ x < domain_end`.
    pub fn eval(&self, x: T) -> Result<Complex<T>> {
        if !(x >= T::zero() && x < self.domain_end) {
            return Err(Error::Domain(format!("x = {x} is outside [0, {})", self.domain_end)));
        }
        Ok(self.pieces[self.piece_index(x)].kind.value(x, Side::Right))
    }

    /// Left limit `q(x-0)` for `0 < x ≤ domain_end`.
    pub fn eval_left(&self, x: T) -> Result<Complex<T>> {
        if !(x > T::zero() && x <= self.domain_end) {
            return Err(Error::Domain(format!("x = {x} is outside (0, {}]", self.domain_end)));
        }
        let mut i = self.piece_index(x);
        if i > 0 && self.pieces[i].a == x {
            i -= 1;
        }
        Ok(self.pieces[i].kind.value(x, Side::Left))
    }

    /// `q'(x)` from exact differentiation of the active piece.
    pub fn derivative(&self, x: T) -> Result<Complex<T>> {
        if !(x >= T::zero() && x < self.domain_end) {
            return Err(Error::Domain(format!("x = {x} is outside [0, {})", self.domain_end)));
        }
        Ok(self.pieces[self.piece_index(x)].kind.derivative(x))
    }

    fn check_interval(&self, a: T, b: T) -> Result<()> {
        if !(a >= T::zero() && a < b && b <= self.domain_end) {
            return Err(Error::Domain(format!(
                "[{a}, {b}] is not a proper subinterval of [0, {}]",
                self.domain_end
            )));
        }
        Ok(())
    }

    fn overlapping(&self, a: T, b: T) -> impl Iterator<Item = (&Piece<T>, T, T)> {
        let start = self.piece_index(a);
        self.pieces[start..]
            .iter()
            .take_while(move |p| p.a < b)
            .map(move |p| (p, p.a.max(a), p.b.min(b)))
            .filter(|(_, lo, hi)| hi > lo)
    }

    /// Exact `∫_a^b q(x) dx`.
    pub fn integral(&self, a: T, b: T) -> Result<Complex<T>> {
        self.check_interval(a, b)?;
        Ok(self
            .overlapping(a, b)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (p, lo, hi)| acc + p.kind.integral(lo, hi)))
    }

    /// `∫_a^b |q(x)|^w dx` with absolute error at most `tol`.
    ///
    /// The tolerance is shared among the overlapped pieces in proportion to
    /// their length.
    pub fn integrate_abs_power(&self, a: T, b: T, w: Weight, tol: T) -> Result<T> {
        if !(tol > T::zero()) {
            return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
        }
        self.check_interval(a, b)?;
        let span = b - a;
        let mut total = T::zero();
        for (p, lo, hi) in self.overlapping(a, b) {
            total += p.kind.abs_power_integral(lo, hi, w, tol * (hi - lo) / span)?;
        }
        Ok(total)
    }

    /// All points in the open interval `(a, b)` where `q` may jump: piece
    /// boundaries and step switch points, sorted.
    pub fn breakpoints(&self, a: T, b: T) -> Vec<T> {
        let mut out = Vec::new();
        for p in &self.pieces {
            if p.a > a && p.a < b {
                out.push(p.a);
            }
            if p.b > a && p.a < b {
                out.extend(p.kind.jumps(p.a.max(a), p.b.min(b)));
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
        out.dedup();
        out
    }

    /// `true` when every piece is a polynomial (so `q'` exists classically
    /// away from piece boundaries).
    pub fn is_piecewise_smooth(&self) -> bool {
        fn smooth<T>(k: &PieceKind<T>) -> bool {
            match k {
                PieceKind::Polynomial(_) => true,
                PieceKind::Step { .. } => false,
                PieceKind::Scaled { base, .. } => smooth(base),
            }
        }
        self.pieces.iter().all(|p| smooth(&p.kind))
    }
}

/// Block orders `n_k` of the counterexample potential.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RademacherSchedule {
    n: Vec<u32>,
}

impl RademacherSchedule {
    pub fn new(n: Vec<u32>) -> Result<Self> {
        if n.is_empty() {
            return Err(Error::Parameter("schedule needs at least one block".into()));
        }
        if n.contains(&0) {
            return Err(Error::Parameter("every n_k must be at least 1".into()));
        }
        Ok(RademacherSchedule { n })
    }

    pub fn blocks(&self) -> &[u32] {
        &self.n
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }
}

/// Purely imaginary potential equal to `i k r_{n_k}(x - π(k-1))` on the block
/// `[π(k-1), πk)`, `k = 1..K`.
pub fn counterexample_potential<T: Real>(schedule: &RademacherSchedule) -> Result<Potential<T>> {
    let pieces = schedule
        .blocks()
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            let k: T = from_usize(idx + 1);
            let a = T::PI() * from_usize(idx);
            let b = T::PI() * k;
            Piece {
                a,
                b,
                kind: PieceKind::Step {
                    amplitude: Complex::new(T::zero(), k),
                    n,
                    origin: a,
                    length: T::PI(),
                },
            }
        })
        .collect();
    let end = T::PI() * from_usize(schedule.len());
    let label = format!(
        "counterexample[{}]",
        schedule.blocks().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
    );
    Ok(Potential::new(pieces, end)?.with_label(label))
}

/// Names accepted by [`named_potential`].
pub const POTENTIAL_NAMES: [&str; 7] =
    ["zero", "linear", "minus_x_squared", "i_times_x", "sector_ray", "constant", "counterexample"];

/// Builds one of the standard potentials.
///
/// | name | params | q(x) |
/// |---|---|---|
/// | `zero` | – | 0 |
/// | `linear` | – | x |
/// | `minus_x_squared` | – | −x² |
/// | `i_times_x` | – | i x |
/// | `sector_ray` | θ | x e^{iθ} |
/// | `constant` | re [, im] | c |
/// | `counterexample` | n_1, …, n_K | i k r_{n_k} on block k |
///
/// `domain_end` is required except for `counterexample`, whose domain is
/// `Kπ` (a shorter `domain_end` truncates the last blocks away).
pub fn named_potential<T: Real>(name: &str, params: &[f64], domain_end: Option<T>) -> Result<Potential<T>> {
    let zero = T::zero();
    let c = |re: f64, im: f64| Complex::new(lit::<T>(re), lit::<T>(im));
    let need_end = || domain_end.ok_or_else(|| Error::Parameter(format!("potential `{name}` needs a domain_end")));
    let expect = |k: usize| {
        if params.len() == k {
            Ok(())
        } else {
            Err(Error::Parameter(format!("potential `{name}` takes {k} parameter(s), got {}", params.len())))
        }
    };
    let poly = |coeffs: Vec<Complex<T>>| -> Result<Potential<T>> {
        Ok(Potential::single(PieceKind::Polynomial(coeffs), need_end()?)?.with_label(name))
    };
    match name {
        "zero" => {
            expect(0)?;
            poly(vec![c(0.0, 0.0)])
        }
        "linear" => {
            expect(0)?;
            poly(vec![c(0.0, 0.0), c(1.0, 0.0)])
        }
        "minus_x_squared" => {
            expect(0)?;
            poly(vec![c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
        }
        "i_times_x" => {
            expect(0)?;
            poly(vec![c(0.0, 0.0), c(0.0, 1.0)])
        }
        "sector_ray" => {
            expect(1)?;
            let theta = params[0];
            let p = Potential::single(
                PieceKind::Polynomial(vec![c(0.0, 0.0), c(theta.cos(), theta.sin())]),
                need_end()?,
            )?;
            Ok(p.with_label(format!("sector_ray({theta})")))
        }
        "constant" => {
            let (re, im) = match params {
                [re] => (*re, 0.0),
                [re, im] => (*re, *im),
                _ => return Err(Error::Parameter("potential `constant` takes re [, im]".into())),
            };
            Ok(Potential::single(PieceKind::constant(c(re, im)), need_end()?)?.with_label(format!("constant({re},{im})")))
        }
        "counterexample" => {
            let n = params
                .iter()
                .map(|&v| {
                    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                        Ok(v as u32)
                    } else {
                        Err(Error::Parameter(format!("schedule entries must be positive integers, got {v}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let schedule = RademacherSchedule::new(n)?;
            let full: Potential<T> = counterexample_potential(&schedule)?;
            match domain_end {
                None => Ok(full),
                Some(end) if end >= full.domain_end() => {
                    if end > full.domain_end() * (T::one() + lit(1e-12)) {
                        Err(Error::Parameter(format!(
                            "counterexample with {} blocks covers only [0, {}]",
                            schedule.len(),
                            full.domain_end()
                        )))
                    } else {
                        Ok(full)
                    }
                }
                Some(end) if end > zero => full.truncated(end),
                Some(end) => Err(Error::Parameter(format!("domain_end must be positive, got {end}"))),
            }
        }
        other => Err(Error::Parameter(format!(
            "unknown potential `{other}`; expected one of {}",
            POTENTIAL_NAMES.join(", ")
        ))),
    }
}

impl<T: Real> Potential<T> {
    /// Restriction to `[0, end)`.
    pub fn truncated(&self, end: T) -> Result<Self> {
        if !(end > T::zero() && end <= self.domain_end) {
            return Err(Error::Domain(format!("cannot truncate [0, {}) at {end}", self.domain_end)));
        }
        let pieces = self
            .pieces
            .iter()
            .filter(|p| p.a < end)
            .map(|p| Piece { a: p.a, b: p.b.min(end), kind: p.kind.clone() })
            .collect();
        Ok(Potential::new(pieces, end)?.with_label(self.label.clone()))
    }
}

/// A sector `α ≤ arg(q(x) - q0) ≤ β` required for `x ≥ x0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec<T> {
    pub q0: Complex<T>,
    pub x0: T,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> SectorSpec<T> {
    pub fn new(q0: Complex<T>, x0: T, alpha: T, beta: T) -> Result<Self> {
        if !(x0 >= T::zero()) {
            return Err(Error::Parameter(format!("x0 must be non-negative, got {x0}")));
        }
        if !(-T::PI() < alpha && alpha <= beta && beta < T::PI()) {
            return Err(Error::Parameter(format!("need -π < α ≤ β < π, got α = {alpha}, β = {beta}")));
        }
        Ok(SectorSpec { q0, x0, alpha, beta })
    }

    /// Whether the sector is narrower than a half-plane.
    pub fn is_sectorial(&self) -> bool {
        self.beta - self.alpha < T::PI()
    }

    /// Checks the sector condition on the grid `x0, x0 + step, … < X`;
    /// points where `q = q0` are ignored.
    pub fn holds_on(&self, q: &Potential<T>, step: T) -> Result<bool> {
        if !(step > T::zero()) {
            return Err(Error::Parameter("grid step must be positive".into()));
        }
        let mut i = 0usize;
        loop {
            let x = self.x0 + step * from_usize(i);
            if x >= q.domain_end() {
                return Ok(true);
            }
            let z = q.eval(x)? - self.q0;
            if z.norm() > T::zero() {
                let arg = z.arg();
                if arg < self.alpha || arg > self.beta {
                    return Ok(false);
                }
            }
            i += 1;
        }
    }
}
