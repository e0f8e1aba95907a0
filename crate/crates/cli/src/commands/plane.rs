use cutfem_core::kernels::counter;
use cutfem_core::mesh::dofs::DofHandler;
use cutfem_core::mesh::CartesianMesh;
use cutfem_core::perf::{measure_throughput, roofline_point, CostModel, Method, ThroughputRecord};
use cutfem_core::{FeKind, LevelSet, PoissonOperator, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::RooflineRow;
use crate::config::{Fe, RunConfig};
use crate::CliError;

/// Cell size of the plane benchmark.
const H: f64 = 1.0 / 16.0;
/// Sparse matrices estimated above this size are skipped.
const SPARSE_BYTE_LIMIT: f64 = 2e9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlaneRow {
    /// `mf`, `mf_unstructured` (all cells through the per-point kernels) or
    /// `sparse`.
    pub case: String,
    pub fe: Fe,
    pub p: usize,
    pub target_ratio: f64,
    pub cut_ratio: f64,
    pub cells: usize,
    pub dofs: usize,
    pub flops_per_apply: u64,
    pub model_bytes_per_dof: f64,
    pub model_flops_per_dof: f64,
    pub model_intensity: f64,
    pub mdofs: f64,
    pub median_s: f64,
    pub repetitions: usize,
    pub gflops: f64,
}

/// Mesh of `n x n x layers` cells below the plane `z = z0`: the top layer
/// is cut in half, so the cut ratio is `1 / layers`. Ratio 0 puts the plane
/// above the mesh. `n` keeps the active cell count near `target_cells`.
pub fn plane_system(cfg: &RunConfig, p: usize, ratio: f64, force_unstructured: bool) -> Result<PoissonOperator, CliError> {
    let layers = if ratio > 0.0 { (1.0 / ratio).round().max(1.0) as usize } else { 1 };
    let n = ((cfg.plane.target_cells as f64 / layers as f64).sqrt().round() as usize).max(1);
    let cells = [n, n, layers];
    let extent = cells.map(|c| c as f64 * H);
    let mesh = CartesianMesh::with_cells(3, [0.0; 3], extent, cells)?;
    let z0 = if ratio > 0.0 { (layers as f64 - 0.5) * H } else { extent[2] + H };
    let ls = LevelSet::plane([0.0, 0.0, 1.0], z0)?;
    let mut oc = cfg.operator_config(p);
    oc.force_unstructured = force_unstructured;
    let handler = DofHandler::build(mesh, &ls, oc.fe, p)?;
    Ok(PoissonOperator::new(handler, &ls, oc)?)
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Counted FLOPs of one call and the timing record.
fn measure(
    mut apply: impl FnMut(&[f64], &mut [f64]) -> cutfem_core::Result<()>,
    n: usize,
    cfg: &RunConfig,
    cut_ratio: f64,
) -> Result<(u64, ThroughputRecord), CliError> {
    let x = random_vector(n, cfg.seed);
    let mut y = vec![0.0; n];
    let flops = counter::counted(|| apply(&x, &mut y)).map(|(_, t)| t.total()).unwrap_or(0);
    let rec = measure_throughput(|| apply(&x, &mut y), n, cfg.min_seconds, cut_ratio)?;
    Ok((flops, rec))
}

/// Model for a system with cut ratio `r`: structured and unstructured
/// per-DoF values weighted by the cell fractions.
fn blended_model(cfg: &RunConfig, p: usize, r: f64) -> (f64, f64) {
    let m = |method| {
        let mut c = CostModel::new(method, cfg.fe.into(), p, 3, cfg.lanes);
        c.padding = cfg.padding.into();
        c
    };
    let (s, u) = (m(Method::MfStructured), m(Method::MfUnstructured));
    (
        (1.0 - r) * s.bytes_per_dof() + r * u.bytes_per_dof(),
        (1.0 - r) * s.flops_per_dof() + r * u.flops_per_dof(),
    )
}

fn row(
    case: &str,
    cfg: &RunConfig,
    p: usize,
    target: f64,
    op: &PoissonOperator,
    model: (f64, f64),
    (flops, rec): (u64, ThroughputRecord),
) -> PlaneRow {
    PlaneRow {
        case: case.into(),
        fe: cfg.fe,
        p,
        target_ratio: target,
        cut_ratio: rec.cut_ratio,
        cells: op.handler().n_active(),
        dofs: rec.dofs,
        flops_per_apply: flops,
        model_bytes_per_dof: model.0,
        model_flops_per_dof: model.1,
        model_intensity: model.1 / model.0,
        mdofs: rec.mdofs,
        median_s: rec.median_s,
        repetitions: rec.repetitions,
        gflops: flops as f64 / rec.median_s / 1e9,
    }
}

/// Matrix-free and sparse throughput on the same system.
pub fn throughput_pair(cfg: &RunConfig, p: usize, ratio: f64) -> Result<Vec<PlaneRow>, CliError> {
    let op = plane_system(cfg, p, ratio, false)?;
    let r = op.handler().cut_ratio();
    let n = op.n_dofs();
    let mut rows = vec![row("mf", cfg, p, ratio, &op, blended_model(cfg, p, r), measure(|s, d| op.apply(s, d), n, cfg, r)?)];
    let sparse_model = CostModel::new(Method::Sparse, cfg.fe.into(), p, 3, cfg.lanes);
    if sparse_model.bytes_per_dof() * n as f64 > SPARSE_BYTE_LIMIT {
        eprintln!("skipping sparse p={p} ratio={ratio}: matrix too large");
    } else {
        let a = SparseMatrix::assemble(&op);
        let model = (sparse_model.bytes_per_dof(), sparse_model.flops_per_dof());
        rows.push(row("sparse", cfg, p, ratio, &op, model, measure(|s, d| a.spmv(s, d), n, cfg, r)?));
    }
    if ratio == 0.0 {
        let un = plane_system(cfg, p, ratio, true)?;
        let mut m = CostModel::new(Method::MfUnstructured, cfg.fe.into(), p, 3, cfg.lanes);
        m.padding = cfg.padding.into();
        let model = (m.bytes_per_dof(), m.flops_per_dof());
        rows.push(row("mf_unstructured", cfg, p, ratio, &un, model, measure(|s, d| un.apply(s, d), n, cfg, r)?));
    }
    Ok(rows)
}

/// Sweep over the configured cut ratios.
pub fn run_throughput_plane(cfg: &RunConfig) -> Result<(Vec<PlaneRow>, Vec<RooflineRow>), CliError> {
    let mut rows = Vec::new();
    for &ratio in &cfg.plane.cut_ratios {
        for r in throughput_pair(cfg, cfg.degree, ratio)? {
            eprintln!("{} ratio={} cut={:.4} dofs={} {:.1} MDoF/s", r.case, ratio, r.cut_ratio, r.dofs, r.mdofs);
            rows.push(r);
        }
    }
    let machine = cfg.machine_params();
    let roofline = rows
        .iter()
        .map(|r| {
            let label = format!("{}_{}_p{}_ratio{}", r.case, fe_name(r.fe), r.p, r.target_ratio);
            RooflineRow::from(roofline_point(&machine, &label, r.model_intensity, r.gflops))
        })
        .collect();
    Ok((rows, roofline))
}

fn fe_name(fe: Fe) -> &'static str {
    FeKind::from(fe).name()
}
