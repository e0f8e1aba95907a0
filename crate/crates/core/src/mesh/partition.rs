//! Weighted splitting of cell sequences into contiguous worker ranges.

use std::ops::Range;

use crate::geometry::CellCategory;
use crate::mesh::dofs::DofHandler;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionWeights {
    pub inside: u64,
    pub intersected: u64,
    pub outside: u64,
}

impl PartitionWeights {
    /// Intersected cells cost roughly ten inside cells in the matrix-free loop.
    pub const MATRIX_FREE: Self = Self { inside: 1, intersected: 10, outside: 0 };
    pub const MATRIX_BASED: Self = Self { inside: 1, intersected: 1, outside: 0 };

    pub fn of(&self, c: CellCategory) -> u64 {
        match c {
            CellCategory::Inside => self.inside,
            CellCategory::Intersected => self.intersected,
            CellCategory::Outside => self.outside,
        }
    }
}

impl Default for PartitionWeights {
    fn default() -> Self {
        Self::MATRIX_FREE
    }
}

/// Splits items into `n_workers` contiguous ranges. Item `i` goes to the
/// worker whose share of the total weight contains the midpoint of the item,
/// so no worker exceeds `total / n_workers` plus the largest single weight.
pub fn split_weighted(weights: &[u64], n_workers: usize) -> Vec<Range<usize>> {
    let n = n_workers.max(1);
    let total: u64 = weights.iter().sum();
    let mut ranges = vec![0..0; n];
    if weights.is_empty() {
        return ranges;
    }
    let mut prefix = 0u128;
    let mut owner = Vec::with_capacity(weights.len());
    for &w in weights {
        let mid2 = 2 * prefix + w as u128;
        let o = if total == 0 { 0 } else { (mid2 * n as u128 / (2 * total as u128)) as usize };
        owner.push(o.min(n - 1));
        prefix += w as u128;
    }
    let mut start = 0;
    for (worker, range) in ranges.iter_mut().enumerate() {
        let end = start + owner[start..].iter().take_while(|&&o| o == worker).count();
        *range = start..end;
        start = end;
    }
    debug_assert_eq!(start, weights.len());
    ranges
}

/// Worker ranges over the active cells of `handler`.
pub fn partition_cells<T: Real>(
    handler: &DofHandler<T>,
    weights: PartitionWeights,
    n_workers: usize,
) -> Vec<Range<usize>> {
    let w: Vec<u64> = (0..handler.n_active()).map(|a| weights.of(handler.category_of(a))).collect();
    split_weighted(&w, n_workers)
}
