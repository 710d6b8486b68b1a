//! Adaptive quadrature on finite intervals.

use crate::error::{Error, Result};

/// Adaptive Simpson integration of `f` over [a, b] with absolute tolerance
/// `tol`. Fails (rather than silently degrading) when the recursion depth is
/// exhausted before the local error estimate drops below the budget.
pub fn adaptive_simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(b > a) {
        return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn rec(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || (b - a) < f64::EPSILON * (a.abs() + b.abs()) {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature { a, b, err: err.abs() / 15.0 });
    }
    let half = 0.5 * tol;
    Ok(rec(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + rec(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}
