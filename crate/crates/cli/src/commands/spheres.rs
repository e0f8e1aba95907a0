use cutfem_core::mesh::dofs::DofHandler;
use cutfem_core::mesh::CartesianMesh;
use cutfem_core::perf::measure_throughput;
use cutfem_core::{CellCategory, PoissonOperator};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpheresSummary {
    pub spheres: usize,
    pub active_cells: usize,
    pub cut_cells: usize,
    pub cut_ratio: f64,
    pub dofs: usize,
    /// Volume plus surface points per cut cell, before padding.
    pub quad_points_max: usize,
    pub quad_points_mean: f64,
    pub low_order_entities: usize,
    pub mdofs: f64,
    pub median_s: f64,
    pub repetitions: usize,
}

/// Matrix-free operator on the union of many spheres.
pub fn run_spheres(cfg: &RunConfig) -> Result<SpheresSummary, CliError> {
    let ls = cfg.level_set()?;
    let m = &cfg.mesh;
    let mesh = CartesianMesh::build(3, m.lo, m.hi - m.lo, m.base_cells, m.refinements)?;
    let handler = DofHandler::build(mesh, &ls, cfg.fe.into(), cfg.degree)?;
    let op = PoissonOperator::new(handler, &ls, cfg.operator_config(cfg.degree))?;
    let t = op.tables();
    let counts: Vec<usize> = t.cell_rules.iter().map(|r| r.n_volume + r.n_surface).collect();
    let n = op.n_dofs();
    let x: Vec<f64> = (0..n).map(|i| ((i * 7919 + cfg.seed as usize) % 1000) as f64 * 1e-3).collect();
    let mut y = vec![0.0; n];
    let rec = measure_throughput(|| op.apply(&x, &mut y), n, cfg.min_seconds, op.handler().cut_ratio())?;
    Ok(SpheresSummary {
        spheres: ls.member_count(),
        active_cells: op.handler().n_active(),
        cut_cells: op.handler().count(CellCategory::Intersected),
        cut_ratio: op.handler().cut_ratio(),
        dofs: n,
        quad_points_max: counts.iter().copied().max().unwrap_or(0),
        quad_points_mean: if counts.is_empty() { 0.0 } else { counts.iter().sum::<usize>() as f64 / counts.len() as f64 },
        low_order_entities: t.low_order_entities,
        mdofs: rec.mdofs,
        median_s: rec.median_s,
        repetitions: rec.repetitions,
    })
}
