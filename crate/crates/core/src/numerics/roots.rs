use crate::error::{Error, Result};

pub const BISECT_MAX_ITER: usize = 200;

/// Bisection on a bracketing interval.
///
/// Returns a point `r` where `|g(r)| <= tol`, or the midpoint once the
/// bracket has shrunk to width `tol`. The signs of `g(lo)` and `g(hi)` must
/// differ unless one of them is already within `tol` of zero.
pub fn bisect<G>(g: G, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut glo = g(lo);
    let ghi = g(hi);
    if !glo.is_finite() || !ghi.is_finite() {
        return Err(Error::non_finite("bisection endpoint"));
    }
    if glo.abs() <= tol {
        return Ok(lo);
    }
    if ghi.abs() <= tol {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::Bracket { lo, hi, glo, ghi });
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if !gm.is_finite() {
            return Err(Error::non_finite("bisection midpoint"));
        }
        if gm.abs() <= tol || (hi - lo) <= tol {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Err(Error::IterationCap {
        what: "bisection",
        cap: BISECT_MAX_ITER,
    })
}
