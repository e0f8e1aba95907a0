//! Cost models for operator evaluation (FMAs per kernel, bytes and FLOPs
//! per DoF), roofline bounds and throughput measurement.

use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::mesh::dofs::FeKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    StructuredCell,
    StructuredFace,
    UnstructuredCell,
    UnstructuredFace,
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured-cell" => Ok(Self::StructuredCell),
            "structured-face" => Ok(Self::StructuredFace),
            "unstructured-cell" => Ok(Self::UnstructuredCell),
            "unstructured-face" => Ok(Self::UnstructuredFace),
            _ => Err(Error::Config(format!("unknown kernel kind '{s}'"))),
        }
    }
}

/// FMAs to evaluate values and gradients in 3D with `k` DoFs and `n_q`
/// points per direction (integration costs the same).
pub fn model_kernel_fmas(kind: KernelKind, k: usize, n_q: usize) -> u64 {
    let (k, n) = (k as u64, n_q as u64);
    match kind {
        KernelKind::StructuredCell => k * k * k * n + k * k * n * n + n * n * n * k + 3 * n.pow(4),
        KernelKind::StructuredFace => k * k * n + n * n * k + 2 * n.pow(3) + k.pow(3) + k * k * n + n * n * k,
        KernelKind::UnstructuredCell => unstructured_cell_fmas(k as usize, n.pow(3) as usize),
        KernelKind::UnstructuredFace => unstructured_face_fmas(k as usize, n.pow(2) as usize),
    }
}

/// Unstructured cell kernel on `points` quadrature points.
pub fn unstructured_cell_fmas(k: usize, points: usize) -> u64 {
    let (k, n) = (k as u64, points as u64);
    n * (k * k * k + k * k + k) + n * (k * k * k + 2 * k * k + 3 * k)
}

/// Unstructured face kernel on `points` in-face quadrature points.
pub fn unstructured_face_fmas(k: usize, points: usize) -> u64 {
    let (k, n) = (k as u64, points as u64);
    n * (2 * k * k + 3 * k) + k * k * k + n * (k * k + k)
}

/// How point counts are padded to the lane width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Padding {
    /// `(ceil(n_q / W) W)^d`.
    #[default]
    PerDirection,
    /// `ceil(n_q^d / W) W`.
    Total,
}

/// Points of a `dim`-dimensional tensor rule with `n_q` points per
/// direction after padding to `lanes`.
pub fn padded_points(n_q: usize, dim: usize, lanes: usize, padding: Padding) -> usize {
    let up = |n: usize| n.div_ceil(lanes) * lanes;
    match padding {
        Padding::PerDirection => up(n_q).pow(dim as u32),
        Padding::Total => up(n_q.pow(dim as u32)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sparse,
    MfStructured,
    MfUnstructured,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sparse => "sparse",
            Method::MfStructured => "mf_structured",
            Method::MfUnstructured => "mf_unstructured",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(Self::Sparse),
            "mf_structured" => Ok(Self::MfStructured),
            "mf_unstructured" => Ok(Self::MfUnstructured),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Per-DoF characteristics of one way to evaluate the Laplacian on a
/// Cartesian mesh, `n_q = p + 1` points per direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub method: Method,
    pub fe: FeKind,
    pub degree: usize,
    pub dim: usize,
    pub lanes: usize,
    /// Uniform subdivisions of the unstructured rules.
    pub n_ref: usize,
    pub padding: Padding,
}

impl CostModel {
    pub fn new(method: Method, fe: FeKind, degree: usize, dim: usize, lanes: usize) -> Self {
        Self { method, fe, degree, dim, lanes, n_ref: 0, padding: Padding::PerDirection }
    }

    fn k(&self) -> usize {
        self.degree + 1
    }

    /// Unique DoFs per cell.
    fn dofs_per_cell(&self) -> f64 {
        match self.fe {
            FeKind::Cg => (self.degree as f64).powi(self.dim as i32),
            FeKind::Dg => (self.k() as f64).powi(self.dim as i32),
        }
    }

    fn points(&self, dim: usize) -> usize {
        padded_points(self.k() << self.n_ref, dim, self.lanes, self.padding)
    }

    pub fn bytes_per_dof(&self) -> f64 {
        let d = self.dim as i32;
        let p = self.degree as f64;
        let w = self.lanes as f64;
        let kd = (self.k() as f64).powi(d);
        let nc = self.dofs_per_cell();
        let faces = 2.0 * self.dim as f64;
        match (self.method, self.fe) {
            (Method::Sparse, FeKind::Cg) => 12.0 * (p + 2.0).powi(d),
            (Method::Sparse, FeKind::Dg) => 12.0 * (faces + 1.0) * (p + 1.0).powi(d),
            (Method::MfStructured, FeKind::Cg) => (14.0 / w) / nc + kd / nc * 4.0 + 24.0,
            (Method::MfStructured, FeKind::Dg) => (14.0 / w + faces * (4.0 + 18.0 / w)) / nc + 24.0,
            (Method::MfUnstructured, FeKind::Cg) => {
                (25.0 + 14.0 / w) / nc + self.points(self.dim) as f64 / nc * 32.0 + kd / nc * 4.0 + 24.0
            }
            (Method::MfUnstructured, FeKind::Dg) => {
                ((25.0 + 14.0 / w) + faces * (29.0 + 18.0 / w)) / nc
                    + self.points(self.dim) as f64 / nc * 32.0
                    + faces * self.points(self.dim - 1) as f64 / nc * 24.0
                    + 24.0
            }
        }
    }

    /// FLOPs per DoF: evaluation plus integration, two FLOPs per FMA. DG
    /// adds `2d` face sides per cell.
    pub fn flops_per_dof(&self) -> f64 {
        let d = self.dim as i32;
        let p = self.degree as f64;
        let k = self.k();
        let nc = self.dofs_per_cell();
        let faces = 2 * self.dim as u64;
        let with_faces = |cell: u64, face: u64| match self.fe {
            FeKind::Cg => 4.0 * cell as f64 / nc,
            FeKind::Dg => 4.0 * (cell + faces * face) as f64 / nc,
        };
        match self.method {
            Method::Sparse => match self.fe {
                FeKind::Cg => 2.0 * (p + 2.0).powi(d),
                FeKind::Dg => 2.0 * (2.0 * self.dim as f64 + 1.0) * (p + 1.0).powi(d),
            },
            Method::MfStructured => with_faces(
                model_kernel_fmas(KernelKind::StructuredCell, k, k),
                model_kernel_fmas(KernelKind::StructuredFace, k, k),
            ),
            Method::MfUnstructured => with_faces(
                unstructured_cell_fmas(k, self.points(self.dim)),
                unstructured_face_fmas(k, self.points(self.dim - 1)),
            ),
        }
    }

    pub fn intensity(&self) -> f64 {
        self.flops_per_dof() / self.bytes_per_dof()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MachineParams {
    pub bandwidth_gbs: f64,
    pub peak_gflops: f64,
}

impl MachineParams {
    pub fn new(bandwidth_gbs: f64, peak_gflops: f64) -> Result<Self> {
        if !(bandwidth_gbs > 0.0 && peak_gflops > 0.0) {
            return Err(Error::Config("bandwidth and peak must be positive".into()));
        }
        Ok(Self { bandwidth_gbs, peak_gflops })
    }

    /// Intensity at which the bandwidth and compute limits meet.
    pub fn ridge(&self) -> f64 {
        self.peak_gflops / self.bandwidth_gbs
    }

    pub fn attainable(&self, intensity: f64) -> f64 {
        self.peak_gflops.min(self.bandwidth_gbs * intensity)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RooflinePoint {
    pub label: String,
    pub intensity: f64,
    pub gflops: f64,
    pub attainable: f64,
    pub efficiency: f64,
}

pub fn roofline_point(machine: &MachineParams, label: &str, intensity: f64, gflops: f64) -> RooflinePoint {
    let attainable = machine.attainable(intensity);
    let efficiency = if attainable > 0.0 { gflops / attainable } else { 0.0 };
    RooflinePoint { label: label.to_string(), intensity, gflops, attainable, efficiency }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThroughputRecord {
    pub dofs: usize,
    pub repetitions: usize,
    /// Total time of the timed repetitions.
    pub wall_time_s: f64,
    pub median_s: f64,
    /// DoFs per median repetition, in millions per second.
    pub mdofs: f64,
    pub cut_ratio: f64,
}

/// Shortest repetition the harness accepts.
const MIN_REPETITION: Duration = Duration::from_nanos(500);

/// Times `apply` after one warm-up call until `min_seconds` have passed
/// (at least three repetitions) and reports the median.
pub fn measure_throughput(
    mut apply: impl FnMut() -> Result<()>,
    dofs: usize,
    min_seconds: f64,
    cut_ratio: f64,
) -> Result<ThroughputRecord> {
    apply()?;
    let mut times = Vec::new();
    let start = Instant::now();
    while times.len() < 3 || start.elapsed().as_secs_f64() < min_seconds {
        let t = Instant::now();
        apply()?;
        times.push(t.elapsed());
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    times.sort_unstable();
    let median = times[times.len() / 2];
    if median < MIN_REPETITION {
        return Err(Error::TimerResolution(median.as_nanos()));
    }
    let median_s = median.as_secs_f64();
    Ok(ThroughputRecord {
        dofs,
        repetitions: times.len(),
        wall_time_s,
        median_s,
        mdofs: dofs as f64 / median_s / 1e6,
        cut_ratio,
    })
}
