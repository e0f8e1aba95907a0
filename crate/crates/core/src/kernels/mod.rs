//! Evaluation kernels: 1D shape tables, sum factorization on tensor
//! quadrature, and per-point evaluation for arbitrary point sets.

pub mod counter;
pub mod points;
pub mod shape;
pub mod sumfac;
