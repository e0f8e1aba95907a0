//! Fixed-width arithmetic packs.
//!
//! A [`Pack`] holds `W` scalars and overloads the elementwise arithmetic
//! operators, so kernels written against [`Lanes`] run either on a single
//! scalar or on `W` independent lanes at once (cells, faces, or quadrature
//! points, depending on the caller). Inner loops over the lane array are
//! simple enough for the compiler to map onto SIMD registers.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::scalar::Real;

/// Lane widths accepted by the batching and kernel layers.
pub const SUPPORTED_WIDTHS: [usize; 5] = [1, 2, 4, 8, 16];

pub trait Lanes<T: Real>:
    Copy
    + Send
    + Sync
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<T, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const WIDTH: usize;

    fn splat(v: T) -> Self;

    #[inline(always)]
    fn zero() -> Self {
        Self::splat(T::zero())
    }

    fn lane(&self, i: usize) -> T;

    fn set_lane(&mut self, i: usize, v: T);

    fn horizontal_sum(self) -> T;

    /// Loads `WIDTH` consecutive scalars.
    fn load(src: &[T]) -> Self;
}

impl<T: Real> Lanes<T> for T {
    const WIDTH: usize = 1;

    #[inline(always)]
    fn splat(v: T) -> Self {
        v
    }

    #[inline(always)]
    fn lane(&self, _i: usize) -> T {
        *self
    }

    #[inline(always)]
    fn set_lane(&mut self, _i: usize, v: T) {
        *self = v;
    }

    #[inline(always)]
    fn horizontal_sum(self) -> T {
        self
    }

    #[inline(always)]
    fn load(src: &[T]) -> Self {
        src[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[repr(C)]
pub struct Pack<T, const W: usize>(pub [T; W]);

impl<T: Real, const W: usize> Default for Pack<T, W> {
    fn default() -> Self {
        Pack([T::zero(); W])
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $atr:ident, $af:ident, $op:tt) => {
        impl<T: Real, const W: usize> $tr for Pack<T, W> {
            type Output = Self;
            #[inline(always)]
            fn $f(self, rhs: Self) -> Self {
                let mut out = self.0;
                for i in 0..W {
                    out[i] = self.0[i] $op rhs.0[i];
                }
                Pack(out)
            }
        }
        impl<T: Real, const W: usize> $atr for Pack<T, W> {
            #[inline(always)]
            fn $af(&mut self, rhs: Self) {
                for i in 0..W {
                    self.0[i] = self.0[i] $op rhs.0[i];
                }
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign, +);
binop!(Sub, sub, SubAssign, sub_assign, -);
binop!(Mul, mul, MulAssign, mul_assign, *);

impl<T: Real, const W: usize> Mul<T> for Pack<T, W> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, rhs: T) -> Self {
        let mut out = self.0;
        for v in out.iter_mut() {
            *v = *v * rhs;
        }
        Pack(out)
    }
}

impl<T: Real, const W: usize> Neg for Pack<T, W> {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        let mut out = self.0;
        for v in out.iter_mut() {
            *v = -*v;
        }
        Pack(out)
    }
}

impl<T: Real, const W: usize> Lanes<T> for Pack<T, W> {
    const WIDTH: usize = W;

    #[inline(always)]
    fn splat(v: T) -> Self {
        Pack([v; W])
    }

    #[inline(always)]
    fn lane(&self, i: usize) -> T {
        self.0[i]
    }

    #[inline(always)]
    fn set_lane(&mut self, i: usize, v: T) {
        self.0[i] = v;
    }

    #[inline(always)]
    fn horizontal_sum(self) -> T {
        // fixed left-to-right order
        self.0.iter().fold(T::zero(), |a, &b| a + b)
    }

    #[inline(always)]
    fn load(src: &[T]) -> Self {
        let mut out = [T::zero(); W];
        out.copy_from_slice(&src[..W]);
        Pack(out)
    }
}

/// Calls `$body` with the const generic `$w` bound to the runtime lane
/// count, or evaluates `$fallback` for unsupported widths.
#[macro_export]
macro_rules! dispatch_lanes {
    ($lanes:expr, $w:ident => $body:expr, _ => $fallback:expr) => {
        match $lanes {
            1 => {
                const $w: usize = 1;
                $body
            }
            2 => {
                const $w: usize = 2;
                $body
            }
            4 => {
                const $w: usize = 4;
                $body
            }
            8 => {
                const $w: usize = 8;
                $body
            }
            16 => {
                const $w: usize = 16;
                $body
            }
            _ => $fallback,
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_arithmetic_is_elementwise() {
        let a = Pack([1.0f64, 2.0, 3.0, 4.0]);
        let b = Pack([0.5f64, -1.0, 2.0, 0.0]);
        assert_eq!((a + b).0, [1.5, 1.0, 5.0, 4.0]);
        assert_eq!((a * b).0, [0.5, -2.0, 6.0, 0.0]);
        assert_eq!((a * 2.0).0, [2.0, 4.0, 6.0, 8.0]);
        assert_eq!(a.horizontal_sum(), 10.0);
        assert_eq!((-a).lane(2), -3.0);
    }

    #[test]
    fn dispatch_selects_width() {
        for w in SUPPORTED_WIDTHS {
            let got = dispatch_lanes!(w, W => <Pack<f64, W> as Lanes<f64>>::WIDTH, _ => 0);
            assert_eq!(got, w);
        }
        assert_eq!(dispatch_lanes!(3usize, W => W, _ => 0), 0);
    }
}
