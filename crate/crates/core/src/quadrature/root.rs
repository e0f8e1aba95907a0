//! Bracketed root finding along a line segment.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Equispaced samples used to detect sign changes on a segment.
pub const SCAN_SAMPLES: usize = 16;
/// More sign changes than this on one segment asks the caller to subdivide.
pub const MAX_ROOTS_PER_LINE: usize = 4;

const BISECT_REL_WIDTH: f64 = 1e-8;
const NEWTON_STEPS: usize = 5;
const TOLERANCE: f64 = 1e-13;

/// Locates the root of `g` in `[lo, hi]` given `g(lo) * g(hi) < 0`.
/// Bisection down to a relative width of `1e-8`, then Newton polishing with
/// `dg`; bisection resumes if Newton leaves the bracket or stalls.
pub fn bracketed_root<T: Real>(
    g: &impl Fn(T) -> T,
    dg: &impl Fn(T) -> T,
    mut lo: T,
    mut hi: T,
    scale: T,
) -> Result<T> {
    let (a0, b0) = (lo, hi);
    let mut glo = g(lo);
    let tol = T::of(TOLERANCE) * scale;
    let coarse = T::of(BISECT_REL_WIDTH) * scale;
    let half = T::of(0.5);
    for _ in 0..200 {
        if hi - lo <= coarse {
            break;
        }
        let mid = (lo + hi) * half;
        let gm = g(mid);
        if gm == T::zero() {
            return Ok(mid);
        }
        if (gm < T::zero()) == (glo < T::zero()) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let mut x = (lo + hi) * half;
    for _ in 0..NEWTON_STEPS {
        let d = dg(x);
        if d == T::zero() || !d.is_finite() {
            break;
        }
        let step = g(x) / d;
        let next = x - step;
        if !(next >= lo && next <= hi) {
            break;
        }
        x = next;
        if step.abs() <= tol {
            return Ok(x);
        }
    }
    // Newton did not settle: finish by bisection
    for _ in 0..200 {
        if hi - lo <= tol {
            return Ok((lo + hi) * half);
        }
        let mid = (lo + hi) * half;
        let gm = g(mid);
        if gm == T::zero() {
            return Ok(mid);
        }
        if (gm < T::zero()) == (glo < T::zero()) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Err(Error::RootNotConverged(a0.as_f64(), b0.as_f64()))
}

/// All sign changes of `g` on `[a, b]` detected on the sample scan, polished
/// to full precision and returned in ascending order. Exact zeros at scan
/// points count as roots.
pub fn find_roots<T: Real>(
    g: &impl Fn(T) -> T,
    dg: &impl Fn(T) -> T,
    a: T,
    b: T,
    out: &mut Vec<T>,
) -> Result<()> {
    out.clear();
    let len = b - a;
    let n = SCAN_SAMPLES - 1;
    let mut t_prev = a;
    let mut g_prev = g(a);
    if g_prev == T::zero() {
        out.push(a);
    }
    for i in 1..=n {
        let t = if i == n { b } else { a + len * T::of_usize(i) / T::of_usize(n) };
        let gt = g(t);
        if gt == T::zero() {
            out.push(t);
        } else if g_prev != T::zero() && (gt < T::zero()) != (g_prev < T::zero()) {
            out.push(bracketed_root(g, dg, t_prev, t, len)?);
        }
        t_prev = t;
        g_prev = gt;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_quadratic() {
        let g = |x: f64| x * x - 2.0;
        let dg = |x: f64| 2.0 * x;
        let r = bracketed_root(&g, &dg, 0.0, 2.0, 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn multiple_roots_sorted() {
        let g = |x: f64| (x - 0.13) * (x - 0.52) * (x - 0.91);
        let dg = |x: f64| {
            (x - 0.52) * (x - 0.91) + (x - 0.13) * (x - 0.91) + (x - 0.13) * (x - 0.52)
        };
        let mut out = Vec::new();
        find_roots(&g, &dg, 0.0, 1.0, &mut out).unwrap();
        assert_eq!(out.len(), 3);
        for (r, e) in out.iter().zip([0.13, 0.52, 0.91]) {
            assert!((r - e).abs() < 1e-13);
        }
    }

    #[test]
    fn wrong_derivative_still_converges() {
        let g = |x: f64| x - 0.3;
        let dg = |_: f64| -1e-3;
        let r = bracketed_root(&g, &dg, 0.0, 1.0, 1.0).unwrap();
        assert!((r - 0.3).abs() < 1e-13);
    }

    #[test]
    fn no_sign_change_no_roots() {
        let mut out = vec![1.0];
        find_roots(&|x: f64| x * x + 1.0, &|x: f64| 2.0 * x, -1.0, 1.0, &mut out).unwrap();
        assert!(out.is_empty());
    }
}
