use crate::scalar::from_usize;
use crate::{Error, Real, Result};

/// Index `j` (1-based) of the subinterval `[π(j-1)/n, πj/n)` containing `t`.
///
/// The floor is corrected by one in either direction so that the computed
/// breakpoints `πj/n` themselves belong to the right-hand subinterval.
fn piece_index<T: Real>(n: u32, t: T) -> usize {
    let n_t: T = from_usize(n as usize);
    let width = T::PI() / n_t;
    let mut j = (t / width).floor().to_usize().unwrap_or(0).min(n as usize - 1);
    if j + 1 < n as usize && t >= width * from_usize(j + 1) {
        j += 1;
    }
    if j > 0 && t < width * from_usize(j) {
        j -= 1;
    }
    j + 1
}

/// The alternating step `r_n(t) = (-1)^{j+1}` for `t ∈ [π(j-1)/n, πj/n)`.
pub fn rademacher_step<T: Real>(n: u32, t: T) -> Result<i8> {
    if n == 0 {
        return Err(Error::Parameter("step count n must be at least 1".into()));
    }
    if !(t >= T::zero() && t < T::PI()) {
        return Err(Error::Domain(format!("t = {t} is outside [0, π)")));
    }
    Ok(if piece_index(n, t) % 2 == 1 { 1 } else { -1 })
}

/// `∫_0^t r_n(s) ds` for `t ∈ [0, π]`, evaluated in closed form.
pub fn rademacher_primitive<T: Real>(n: u32, t: T) -> T {
    let width = T::PI() / from_usize::<T>(n as usize);
    if t >= T::PI() {
        return if n % 2 == 1 { width } else { T::zero() };
    }
    if t <= T::zero() {
        return T::zero();
    }
    let j = piece_index(n, t); // t lies in piece j
    let full = j - 1;
    let base = if full % 2 == 1 { width } else { T::zero() };
    let partial = t - width * from_usize(full);
    if j % 2 == 1 {
        base + partial
    } else {
        base - partial
    }
}

/// `∫_a^b r_n(t) dt` for `0 ≤ a ≤ b ≤ π`.
pub fn rademacher_integral<T: Real>(n: u32, a: T, b: T) -> T {
    rademacher_primitive(n, b) - rademacher_primitive(n, a)
}

/// `|∫_a^b r_n dt|` for each `n`; these tend to zero like `π/n`, which is the
/// weak convergence of multiplication by `r_n` tested on indicators.
pub fn weak_convergence_check<T: Real>(n_list: &[u32], a: T, b: T) -> Result<Vec<T>> {
    if !(a >= T::zero() && a < b && b <= T::PI()) {
        return Err(Error::Domain(format!("[{a}, {b}] is not a subinterval of [0, π]")));
    }
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                Err(Error::Parameter("step count n must be at least 1".into()))
            } else {
                Ok(rademacher_integral(n, a, b).abs())
            }
        })
        .collect()
}
