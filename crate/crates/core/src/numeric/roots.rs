use crate::error::{Error, Result};

/// Bisection for a sign change of `f` on `[a, b]`.
///
/// Stops when the bracket is narrower than `x_tol` or cannot shrink any
/// further in floating point.
pub fn bisect<F>(mut f: F, a: f64, b: f64, x_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::NumericDomain(format!(
            "no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.is_nan() {
            return Err(Error::NumericDomain(format!("NaN at x = {mid}")));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves `f(x) = target` for increasing `f`, growing the bracket from
/// `[lo, hi]` outward until it straddles the target.
pub fn solve_increasing<F>(mut f: F, target: f64, lo: f64, hi: f64, x_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut width = (hi - lo).max(1.0);
    let mut grown = 0;
    while f(lo) > target {
        lo -= width;
        width *= 2.0;
        grown += 1;
        if grown > 80 || !lo.is_finite() {
            return Err(Error::NumericDomain(format!(
                "value {target} lies below the range of an increasing map"
            )));
        }
    }
    width = (hi - lo).max(1.0);
    grown = 0;
    while f(hi) < target {
        hi += width;
        width *= 2.0;
        grown += 1;
        if grown > 80 || !hi.is_finite() {
            return Err(Error::NumericDomain(format!(
                "value {target} lies above the range of an increasing map"
            )));
        }
    }
    bisect(|x| f(x) - target, lo, hi, x_tol)
}
