//! Jacobi-preconditioned conjugate gradients, L2 errors against analytic
//! solutions and convergence orders.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CellCategory, LevelSet, ManufacturedSolution};
use crate::kernels::shape::ShapeInfo;
use crate::mesh::dofs::DofHandler;
use crate::mesh::CartesianMesh;
use crate::operators::{OperatorConfig, PoissonOperator};
use crate::quadrature::cut::cut_cell_rule;
use crate::quadrature::TensorQuadrature;
use crate::scalar::Real;

/// Entries per leaf of the pairwise reductions.
const LEAF: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Stop when `|b - A x| / |b|` drops below this.
    pub tolerance: T,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self { tolerance: T::of(1e-10), max_iterations: 100_000, preconditioner: Preconditioner::Jacobi }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > T::zero() && self.tolerance < T::one()) {
            return Err(Error::Config("solver tolerance must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// `|r_i| / |b|` for `i = 0..=iterations`.
    pub residuals: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport<T> {
    pub l2_rel_error: T,
    pub dofs: usize,
    /// Mesh size over the radius of the domain.
    pub h_over_l: T,
    pub iterations: usize,
    pub wall_time_s: f64,
}

/// Sum in a fixed pairwise order, independent of the thread count.
pub fn pairwise_sum<T: Real>(v: &[T]) -> T {
    if v.len() <= LEAF {
        return v.iter().fold(T::zero(), |s, &x| s + x);
    }
    let mid = v.len().div_ceil(2 * LEAF) * LEAF;
    let (a, b) = v.split_at(mid);
    let (x, y) = rayon::join(|| pairwise_sum(a), || pairwise_sum(b));
    x + y
}

/// Deterministic dot product.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    fn rec<T: Real>(a: &[T], b: &[T]) -> T {
        if a.len() <= LEAF {
            return a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y);
        }
        let mid = a.len().div_ceil(2 * LEAF) * LEAF;
        let (a0, a1) = a.split_at(mid);
        let (b0, b1) = b.split_at(mid);
        let (x, y) = rayon::join(|| rec(a0, b0), || rec(a1, b1));
        x + y
    }
    rec(a, b)
}

/// `y += alpha x`.
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    y.par_iter_mut().zip(x).for_each(|(y, &x)| *y += alpha * x);
}

/// Diagonal of a linear operator from `n` unit-vector applications.
pub fn probe_diagonal<T: Real>(n: usize, mut apply: impl FnMut(&[T], &mut [T]) -> Result<()>) -> Result<Vec<T>> {
    let mut e = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    for i in 0..n {
        e[i] = T::one();
        apply(&e, &mut y)?;
        d[i] = y[i];
        e[i] = T::zero();
    }
    Ok(d)
}

/// Solves `A x = b` from `x = 0`. `diag` is required for Jacobi
/// preconditioning.
pub fn cg_solve<T: Real>(
    apply: impl FnMut(&[T], &mut [T]) -> Result<()>,
    b: &[T],
    diag: Option<&[T]>,
    config: &SolverConfig<T>,
) -> Result<SolveOutcome<T>> {
    cg_solve_observed(apply, b, diag, config, |_, _| {})
}

/// [`cg_solve`] calling `observe(iteration, x)` after every update.
pub fn cg_solve_observed<T: Real>(
    mut apply: impl FnMut(&[T], &mut [T]) -> Result<()>,
    b: &[T],
    diag: Option<&[T]>,
    config: &SolverConfig<T>,
    mut observe: impl FnMut(usize, &[T]),
) -> Result<SolveOutcome<T>> {
    config.validate()?;
    let n = b.len();
    let inv_diag: Option<Vec<T>> = match config.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => {
            let d = diag.ok_or_else(|| Error::Config("Jacobi preconditioner needs the diagonal".into()))?;
            if d.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: d.len() });
            }
            if let Some(&v) = d.iter().find(|&&v| !(v > T::zero())) {
                return Err(Error::Indefinite(v.as_f64()));
            }
            Some(d.iter().map(|&v| T::one() / v).collect())
        }
    };
    let precondition = |r: &[T], z: &mut [T]| match &inv_diag {
        Some(id) => z.par_iter_mut().zip(r).zip(id).for_each(|((z, &r), &d)| *z = r * d),
        None => z.copy_from_slice(r),
    };
    let mut x = vec![T::zero(); n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == T::zero() {
        return Ok(SolveOutcome { x, iterations: 0, residuals: vec![T::zero()] });
    }
    let mut r = b.to_vec();
    let mut z = vec![T::zero(); n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut residuals = vec![T::one()];
    for it in 1..=config.max_iterations {
        apply(&p, &mut q)?;
        let pq = dot(&p, &q);
        if !(pq > T::zero()) {
            return Err(Error::Indefinite(pq.as_f64()));
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        observe(it, &x);
        let res = dot(&r, &r).sqrt() / b_norm;
        residuals.push(res);
        if res <= config.tolerance {
            return Ok(SolveOutcome { x, iterations: it, residuals });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(p, &z)| *p = z + beta * *p);
    }
    Err(Error::NotConverged {
        iterations: config.max_iterations,
        residual: residuals.last().copied().unwrap_or(T::one()).as_f64(),
    })
}

/// Relative L2 error `|u_h - u| / |u|` over the physical domain, with
/// `p + 2` Gauss points per direction on inside cells and cut rules of the
/// same order on intersected cells.
pub fn compute_l2_error<T: Real>(
    handler: &DofHandler<T>,
    ls: &LevelSet<T>,
    x: &[T],
    u: impl Fn(&[T; 3]) -> T + Sync,
    max_subdiv: usize,
) -> Result<T> {
    if x.len() != handler.n_dofs {
        return Err(Error::DimensionMismatch { expected: handler.n_dofs, got: x.len() });
    }
    let dim = handler.dim();
    let k = handler.k;
    let n_q = k + 1;
    let shape = ShapeInfo::<T>::standard(handler.degree)?;
    let tensor = TensorQuadrature::<T>::gauss(dim, n_q)?;
    let mesh = &handler.mesh;
    let parts: Vec<(T, T)> = (0..handler.n_active())
        .into_par_iter()
        .map(|a| -> Result<(T, T)> {
            let cell = handler.active[a];
            let cut;
            let (points, jxw): (&[[T; 3]], Vec<T>) = if handler.category_of(a) == CellCategory::Intersected {
                cut = cut_cell_rule(ls, &mesh.cell_box(cell), n_q, max_subdiv)?;
                (&cut.volume_points, cut.volume_jxw.clone())
            } else {
                let m = mesh.cell_box(cell).measure();
                (&tensor.points, tensor.weights.iter().map(|&w| w * m).collect())
            };
            let dofs = handler.dofs_of(a);
            let mut vals = [vec![T::zero(); k], vec![T::zero(); k], vec![T::zero(); k]];
            let mut scratch = vec![T::zero(); k];
            let (mut err, mut norm) = (T::zero(), T::zero());
            for (r, &w) in points.iter().zip(&jxw) {
                for d in 0..dim {
                    shape.basis.eval(r[d], &mut vals[d], &mut scratch);
                }
                let mut uh = T::zero();
                for (l, &g) in dofs.iter().enumerate() {
                    let mut phi = vals[0][l % k];
                    if dim > 1 {
                        phi *= vals[1][(l / k) % k];
                    }
                    if dim > 2 {
                        phi *= vals[2][l / (k * k)];
                    }
                    uh += phi * x[g as usize];
                }
                let ue = u(&mesh.map_point(cell, r));
                err += w * (uh - ue) * (uh - ue);
                norm += w * ue * ue;
            }
            Ok((err, norm))
        })
        .collect::<Result<_>>()?;
    let err = parts.iter().fold(T::zero(), |s, p| s + p.0);
    let norm = parts.iter().fold(T::zero(), |s, p| s + p.1);
    if norm == T::zero() {
        return Err(Error::ZeroNorm);
    }
    Ok((err / norm).sqrt())
}

/// `log2(e_h / e_{h/2})`.
pub fn estimate_eoc<T: Real>(e_h: T, e_h2: T) -> T {
    (e_h / e_h2).log2()
}

/// Solves `-Δu = f` on the ball of the manufactured solution with `u = 0`
/// on its boundary and reports the error.
pub fn solve_manufactured<T: Real>(
    mesh: CartesianMesh<T>,
    solution: &ManufacturedSolution<T>,
    op_config: OperatorConfig<T>,
    solver: &SolverConfig<T>,
) -> Result<ErrorReport<T>> {
    let start = Instant::now();
    let ls = LevelSet::sphere([T::zero(); 3], solution.radius)?;
    let h_over_l = mesh.h[0] / solution.radius;
    let max_subdiv = op_config.max_subdiv;
    let handler = DofHandler::build(mesh, &ls, op_config.fe, op_config.degree)?;
    let op = PoissonOperator::new(handler, &ls, op_config)?;
    let rhs = op.assemble_rhs(|x| solution.f(x), |x| solution.u(x));
    let diag = op.diagonal();
    let out = cg_solve(|s, d| op.apply(s, d), &rhs, Some(&diag), solver)?;
    let l2_rel_error = compute_l2_error(op.handler(), &ls, &out.x, |x| solution.u(x), max_subdiv)?;
    Ok(ErrorReport {
        l2_rel_error,
        dofs: op.n_dofs(),
        h_over_l,
        iterations: out.iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
