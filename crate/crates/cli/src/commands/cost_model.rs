use cutfem_core::perf::{roofline_point, CostModel, KernelKind, Method, RooflinePoint};
use cutfem_core::FeKind;
use serde::Serialize;

use crate::config::{Fe, RunConfig};
use crate::verify::kernel_flops;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostRow {
    pub method: String,
    pub fe: Fe,
    pub p: usize,
    pub bytes_per_dof: f64,
    pub flops_per_dof: f64,
    pub intensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelRow {
    pub kernel: String,
    pub p: usize,
    pub lanes: usize,
    /// Points the kernel actually processed, padding included.
    pub points: usize,
    pub model_fmas: u64,
    pub counted_flops: u64,
    /// `counted / (2 model) - 1`.
    pub relative_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RooflineRow {
    pub label: String,
    pub intensity: f64,
    pub gflops: f64,
    pub attainable: f64,
    pub efficiency: f64,
}

impl From<RooflinePoint> for RooflineRow {
    fn from(r: RooflinePoint) -> Self {
        Self { label: r.label, intensity: r.intensity, gflops: r.gflops, attainable: r.attainable, efficiency: r.efficiency }
    }
}

const METHODS: [Method; 3] = [Method::Sparse, Method::MfStructured, Method::MfUnstructured];

fn models(cfg: &RunConfig) -> impl Iterator<Item = CostModel> + '_ {
    METHODS.into_iter().flat_map(move |method| {
        [Fe::Cg, Fe::Dg].into_iter().flat_map(move |fe| {
            (1..=cfg.max_degree).map(move |p| {
                let mut m = CostModel::new(method, fe.into(), p, 3, cfg.lanes);
                m.padding = cfg.padding.into();
                m
            })
        })
    })
}

pub fn cost_rows(cfg: &RunConfig) -> Vec<CostRow> {
    models(cfg)
        .map(|m| CostRow {
            method: m.method.name().into(),
            fe: if m.fe == FeKind::Cg { Fe::Cg } else { Fe::Dg },
            p: m.degree,
            bytes_per_dof: m.bytes_per_dof(),
            flops_per_dof: m.flops_per_dof(),
            intensity: m.intensity(),
        })
        .collect()
}

/// Instrumented evaluation kernels against their FMA models, p = 1..4.
pub fn kernel_rows(lanes: usize) -> Result<Vec<KernelRow>, CliError> {
    let kinds = [
        ("structured-cell", KernelKind::StructuredCell),
        ("structured-face", KernelKind::StructuredFace),
        ("unstructured-cell", KernelKind::UnstructuredCell),
        ("unstructured-face", KernelKind::UnstructuredFace),
    ];
    let mut rows = Vec::new();
    for (name, kind) in kinds {
        for p in 1..=4 {
            let c = kernel_flops(kind, p, lanes)?;
            rows.push(KernelRow {
                kernel: name.into(),
                p,
                lanes,
                points: c.points,
                model_fmas: c.model_fmas,
                counted_flops: c.counted_flops,
                relative_excess: c.counted_flops as f64 / (2 * c.model_fmas) as f64 - 1.0,
            });
        }
    }
    Ok(rows)
}

/// Modelled intensities placed under the roofline of the configured
/// machine; `gflops` is the attainable bound itself.
pub fn model_roofline_rows(cfg: &RunConfig) -> Vec<RooflineRow> {
    let machine = cfg.machine_params();
    models(cfg)
        .map(|m| {
            let label = format!("{}_{}_p{}", m.method.name(), m.fe.name(), m.degree);
            let i = m.intensity();
            roofline_point(&machine, &label, i, machine.attainable(i)).into()
        })
        .collect()
}
