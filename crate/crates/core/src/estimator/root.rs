//! Bracketing and Brent root finding for a nonincreasing scalar function.

use crate::error::{Error, Result};

/// Outcome of [`solve_nonincreasing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: f64,
    /// Final bracket containing `value`, ordered `lo <= hi`.
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
    /// Set when the function vanished at both ends of the starting bracket and
    /// the midpoint was returned.
    pub flat: bool,
}

/// Finds a zero of a nonincreasing `f` starting from `[lo, hi]`.
///
/// The bracket is widened geometrically until `f(lo) > 0 > f(hi)`. Widening
/// stops with [`Error::NoSignChange`] once the bracket exceeds ten times its
/// starting width. If `f` is exactly zero at both starting ends the midpoint
/// is returned.
pub fn solve_nonincreasing<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo < hi);
    let limit = 10.0 * (hi - lo);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let mut evaluations = 2;
    if flo == 0.0 && fhi == 0.0 {
        let mid = 0.5 * (lo + hi);
        return Ok(Root {
            value: mid,
            lo,
            hi,
            evaluations,
            flat: true,
        });
    }
    while !(flo > 0.0 && fhi < 0.0) {
        if hi - lo > limit {
            let sign = if flo <= 0.0 { -1 } else { 1 };
            return Err(Error::NoSignChange { lo, hi, sign });
        }
        let width = hi - lo;
        if !(flo > 0.0) {
            lo -= width;
            flo = f(lo);
            evaluations += 1;
        }
        if !(fhi < 0.0) {
            hi += width;
            fhi = f(hi);
            evaluations += 1;
        }
    }
    let mut root = brent(&mut f, lo, hi, flo, fhi, tol, max_iter)?;
    root.evaluations += evaluations;
    Ok(root)
}

/// Brent's method on a
/// bracket with `fa` and `fb` of opposite sign. Stops when the bracket is
/// narrower than about `tol`.
pub fn brent<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    let mut evaluations = 0;

    for _ in 0..max_iter {
        if (fb > 0.0 && fc > 0.0) || (fb < 0.0 && fc < 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(Root {
                value: b,
                lo: b.min(c),
                hi: b.max(c),
                evaluations,
                flat: false,
            });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
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
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        evaluations += 1;
    }
    Err(Error::MaxIterExceeded(max_iter))
}
