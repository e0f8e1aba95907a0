//! Floating point operation tally for the evaluation kernels.
//!
//! Each thread accumulates into its own counter; parallel loops collect the
//! per-task counts and add them to the calling thread afterwards, so a
//! measurement taken with [`counted`] sees all work it triggered. Kernel
//! contractions are tallied under `kernel` (the part the cost models
//! describe); basis evaluation, lane reductions, and quadrature-point
//! arithmetic under `overhead`. Counts are multiplied by the lane width,
//! padding lanes included.

use std::cell::Cell;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlopTally {
    pub kernel: u64,
    pub overhead: u64,
}

impl FlopTally {
    pub fn total(&self) -> u64 {
        self.kernel + self.overhead
    }
}

impl Add for FlopTally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { kernel: self.kernel + o.kernel, overhead: self.overhead + o.overhead }
    }
}

impl AddAssign for FlopTally {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

thread_local! {
    static LOCAL: Cell<FlopTally> = const { Cell::new(FlopTally { kernel: 0, overhead: 0 }) };
}

pub const ENABLED: bool = cfg!(feature = "flop-count");

/// Records `n` fused multiply-adds (2 FLOPs each) of kernel work.
#[inline(always)]
pub fn fma(n: usize) {
    if ENABLED {
        LOCAL.with(|c| {
            let mut t = c.get();
            t.kernel += 2 * n as u64;
            c.set(t);
        });
    }
}

#[inline(always)]
pub fn overhead(flops: usize) {
    if ENABLED {
        LOCAL.with(|c| {
            let mut t = c.get();
            t.overhead += flops as u64;
            c.set(t);
        });
    }
}

/// Removes and returns this thread's tally.
pub fn take_local() -> FlopTally {
    LOCAL.with(|c| c.replace(FlopTally::default()))
}

pub fn add_local(t: FlopTally) {
    if ENABLED {
        LOCAL.with(|c| c.set(c.get() + t));
    }
}

/// Runs `f` with a clean tally and returns what it counted. Work that `f`
/// hands to other threads is included as long as it reports back through
/// [`add_local`] (all operator loops do).
pub fn counted<R>(f: impl FnOnce() -> R) -> Result<(R, FlopTally)> {
    if !ENABLED {
        return Err(Error::InstrumentationDisabled);
    }
    let saved = take_local();
    let r = f();
    let t = take_local();
    add_local(saved + t);
    Ok((r, t))
}

/// Runs `f` on an isolated tally and returns it; used by worker tasks.
pub fn isolated<R>(f: impl FnOnce() -> R) -> (R, FlopTally) {
    let saved = take_local();
    let r = f();
    let t = take_local();
    add_local(saved);
    (r, t)
}

#[cfg(all(test, feature = "flop-count"))]
mod tests {
    use super::*;

    #[test]
    fn nested_counting() {
        let (_, t) = counted(|| {
            fma(3);
            let (_, inner) = counted(|| overhead(5)).unwrap();
            assert_eq!(inner.overhead, 5);
        })
        .unwrap();
        assert_eq!(t, FlopTally { kernel: 6, overhead: 5 });
        let (_, zero) = counted(|| ()).unwrap();
        assert_eq!(zero.total(), 0);
    }

    #[test]
    fn isolated_does_not_leak() {
        let (_, outer) = counted(|| {
            let (_, t) = isolated(|| fma(10));
            assert_eq!(t.kernel, 20);
        })
        .unwrap();
        assert_eq!(outer.kernel, 0);
    }
}
