use std::f64::consts::PI;

use cutfem_core::mesh::CartesianMesh;
use cutfem_core::solver::{estimate_eoc, solve_manufactured, Preconditioner, SolverConfig};
use cutfem_core::ManufacturedSolution;
use serde::Serialize;

use crate::config::{Fe, GeometrySpec, RunConfig};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub fe: Fe,
    pub p: usize,
    pub refinement: usize,
    pub h_over_l: f64,
    pub dofs: usize,
    pub l2_rel_error: f64,
    pub eoc: Option<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// Solver failure of this row, if any.
    pub error: Option<String>,
}

/// Manufactured-solution study on the ball over the refinement ladder
/// `0..=refinements`, wavenumber pi.
pub fn run_convergence(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>, CliError> {
    let GeometrySpec::Sphere { radius, .. } = cfg.geometry else {
        return Err(CliError::Config("convergence needs a sphere geometry".into()));
    };
    let solution = ManufacturedSolution::new(PI, radius, 3);
    let solver = SolverConfig {
        tolerance: cfg.tolerance,
        max_iterations: cfg.max_iterations,
        preconditioner: Preconditioner::Jacobi,
    };
    let m = &cfg.mesh;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for r in 0..=m.refinements {
        let mesh = CartesianMesh::build(3, m.lo, m.hi - m.lo, m.base_cells, r)?;
        let h_over_l = mesh.h[0] / radius;
        let row = match solve_manufactured(mesh, &solution, cfg.operator_config(cfg.degree), &solver) {
            Ok(rep) => {
                let prev = rows.last().filter(|p| p.error.is_none()).map(|p| p.l2_rel_error);
                ConvergenceRow {
                    fe: cfg.fe,
                    p: cfg.degree,
                    refinement: r,
                    h_over_l: rep.h_over_l,
                    dofs: rep.dofs,
                    l2_rel_error: rep.l2_rel_error,
                    eoc: prev.map(|e| estimate_eoc(e, rep.l2_rel_error)),
                    iterations: rep.iterations,
                    wall_time_s: rep.wall_time_s,
                    error: None,
                }
            }
            Err(e @ (cutfem_core::Error::NotConverged { .. } | cutfem_core::Error::Indefinite(_))) => ConvergenceRow {
                fe: cfg.fe,
                p: cfg.degree,
                refinement: r,
                h_over_l,
                dofs: 0,
                l2_rel_error: f64::NAN,
                eoc: None,
                iterations: 0,
                wall_time_s: 0.0,
                error: Some(e.to_string()),
            },
            Err(e) => return Err(e.into()),
        };
        eprintln!(
            "{:?} p={} r={} dofs={} error={:.4e} eoc={}",
            row.fe,
            row.p,
            r,
            row.dofs,
            row.l2_rel_error,
            row.eoc.map_or("-".into(), |e| format!("{e:.3}"))
        );
        rows.push(row);
    }
    Ok(rows)
}
