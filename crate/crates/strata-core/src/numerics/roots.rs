//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Finds a root of `f` inside `[lo, hi]`; the endpoints must bracket a sign
/// change. Converges to machine precision in the abscissa.
pub fn root_find_1d<F: Scalar>(mut f: impl FnMut(F) -> F, lo: F, hi: F) -> Result<F> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad bracket [{lo}, {hi}]")));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == F::zero() {
        return Ok(a);
    }
    if fb == F::zero() {
        return Ok(b);
    }
    if (fa > F::zero()) == (fb > F::zero()) {
        return Err(Error::NoSignChange {
            lo: a.to_f64().unwrap_or(f64::NAN),
            hi: b.to_f64().unwrap_or(f64::NAN),
            f_lo: fa.to_f64().unwrap_or(f64::NAN),
            f_hi: fb.to_f64().unwrap_or(f64::NAN),
        });
    }
    let two = F::from_f64(2.0).unwrap();
    let three = F::from_f64(3.0).unwrap();
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = two * F::epsilon() * b.abs() + F::from_f64(1e-15).unwrap();
        let xm = (c - b) / two;
        if xm.abs() <= tol || fb == F::zero() {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation, falling back to secant.
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (two * xm * s, F::one() - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (two * xm * q * (q - r) - (b - a) * (r - F::one())),
                    (q - F::one()) * (r - F::one()) * (s - F::one()),
                )
            };
            if p > F::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = three * xm * q - (tol * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b = b + if d.abs() > tol { d } else if xm > F::zero() { tol } else { -tol };
        fb = f(b);
        if (fb > F::zero()) == (fc > F::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Ok(b)
}
