//! Compressed sparse row matrices assembled from the local matrices of a
//! [`PoissonOperator`], used as the matrix-based baseline.

use rayon::prelude::*;

use super::PoissonOperator;
use crate::error::{Error, Result};
use crate::kernels::counter;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SparseMatrix<T> {
    pub n_rows: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Assembles the matrix of `op` from its local matrices.
    pub fn assemble(op: &PoissonOperator<T>) -> Self {
        let n = op.n_dofs();
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        op.for_each_block(|dofs, _| {
            for &i in dofs {
                rows[i as usize].extend_from_slice(dofs);
            }
        });
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
            *r = Vec::new();
        }
        drop(rows);
        let mut vals = vec![T::zero(); cols.len()];
        op.for_each_block(|dofs, m| {
            let nb = dofs.len();
            for (i, &gi) in dofs.iter().enumerate() {
                let range = row_ptr[gi as usize]..row_ptr[gi as usize + 1];
                let row = &cols[range.clone()];
                for (j, &gj) in dofs.iter().enumerate() {
                    let pos = row.binary_search(&gj).expect("column in pattern");
                    vals[range.start + pos] += m[j * nb + i];
                }
            }
        });
        Self { n_rows: n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (c, v) = self.row(i);
        c.binary_search(&(j as u32)).map_or(T::zero(), |p| v[p])
    }

    /// `dst = A src`, rows split over the rayon workers.
    pub fn spmv(&self, src: &[T], dst: &mut [T]) -> Result<()> {
        for v in [src.len(), dst.len()] {
            if v != self.n_rows {
                return Err(Error::DimensionMismatch { expected: self.n_rows, got: v });
            }
        }
        let chunk = 1024;
        let (_, t) = counter::isolated(|| {
            dst.par_chunks_mut(chunk).enumerate().for_each(|(c, out)| {
                for (k, d) in out.iter_mut().enumerate() {
                    let (cols, vals) = self.row(c * chunk + k);
                    let mut s = T::zero();
                    for (&j, &a) in cols.iter().zip(vals) {
                        s += a * src[j as usize];
                    }
                    *d = s;
                }
            });
            counter::fma(self.nnz());
        });
        counter::add_local(t);
        Ok(())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        let mut scale = T::zero();
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                scale = scale.max(a.abs());
                worst = worst.max((a - self.get(j as usize, i)).abs());
            }
        }
        if scale > T::zero() {
            worst / scale
        } else {
            T::zero()
        }
    }

    /// Bytes of matrix data: values, column indices and row pointers.
    pub fn memory_bytes(&self) -> usize {
        self.vals.len() * std::mem::size_of::<T>() + self.cols.len() * 4 + self.row_ptr.len() * 8
    }
}
