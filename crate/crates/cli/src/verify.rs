//! Verification suites: matrix-free against sparse, operator symmetry,
//! kernel adjointness, quadrature moments, ghost-penalty exactness and
//! instrumented kernel counts.

use cutfem_core::geometry::AxisBox;
use cutfem_core::kernels::counter;
use cutfem_core::kernels::points::{
    eval_point, eval_point_value, integrate_point, integrate_point_value, reduce_lanes, PointBasis, PointScratch,
};
use cutfem_core::kernels::shape::ShapeInfo;
use cutfem_core::kernels::sumfac::{
    eval_cell, eval_extrapolated, eval_face, face_dofs, face_dofs_transpose, integrate_cell, integrate_extrapolated,
    integrate_face, Scratch,
};
use cutfem_core::mesh::dofs::DofHandler;
use cutfem_core::mesh::CartesianMesh;
use cutfem_core::operators::local::{Buffers, LocalForms};
use cutfem_core::perf::{model_kernel_fmas, unstructured_cell_fmas, unstructured_face_fmas, KernelKind};
use cutfem_core::quadrature::cut::{cut_surface_points, cut_volume_points, Side};
use cutfem_core::{CellCategory, FeKind, Lanes, LevelSet, Pack, PoissonOperator, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// Lane width of the point kernels in the adjointness and count suites.
const POINT_LANES: usize = 8;
type P8 = Pack<f64, POINT_LANES>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    /// Measured deviation; the check passes when it is at most `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub skipped: bool,
}

impl Check {
    pub fn new(suite: &str, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { suite: suite.into(), name: name.into(), value, tolerance, passed: value <= tolerance, skipped: false }
    }

    fn skipped(suite: &str, name: impl Into<String>) -> Self {
        Self { suite: suite.into(), name: name.into(), value: 0.0, tolerance: 0.0, passed: true, skipped: true }
    }

    pub fn line(&self) -> String {
        if self.skipped {
            return format!("SKIP {}/{}: no active cells", self.suite, self.name);
        }
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}/{}: {:.3e} (tol {:.0e})", self.suite, self.name, self.value, self.tolerance)
    }
}

pub fn run_all(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let mut out = operator_suites(cfg, 1..=3)?;
    out.extend(adjoint_suite(1..=4));
    out.extend(quadrature_suite()?);
    out.extend(ghost_suite(cfg.tau_v)?);
    out.extend(kernel_count_suite(cfg.lanes)?);
    Ok(out)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Operator on the configured geometry and mesh for one element type.
pub fn verify_operator(cfg: &RunConfig, fe: FeKind, p: usize) -> Result<PoissonOperator, CliError> {
    let ls = cfg.level_set()?;
    let m = &cfg.mesh;
    let mesh = CartesianMesh::build(3, m.lo, m.hi - m.lo, m.base_cells, m.refinements)?;
    let handler = DofHandler::build(mesh, &ls, fe, p)?;
    let mut oc = cfg.operator_config(p);
    oc.fe = fe;
    Ok(PoissonOperator::new(handler, &ls, oc)?)
}

/// Matrix-free against assembled sparse products (10 random vectors),
/// sparse symmetry and the symmetry of the matrix-free operator.
pub fn operator_suites(cfg: &RunConfig, degrees: std::ops::RangeInclusive<usize>) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    for fe in [FeKind::Cg, FeKind::Dg] {
        for p in degrees.clone() {
            let tag = format!("{}_p{p}", fe.name());
            let op = verify_operator(cfg, fe, p)?;
            if op.handler().n_active() == 0 {
                out.push(Check::skipped("oracle", &tag));
                out.push(Check::skipped("symmetry", &tag));
                continue;
            }
            let n = op.n_dofs();
            let a = SparseMatrix::assemble(&op);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (p as u64) << 8 ^ fe as u64);
            let (mut y, mut z) = (vec![0.0; n], vec![0.0; n]);
            let mut worst: f64 = 0.0;
            for _ in 0..10 {
                let x = random_vec(&mut rng, n);
                op.apply(&x, &mut y)?;
                a.spmv(&x, &mut z)?;
                let d: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
                worst = worst.max(norm(&d) / norm(&z));
            }
            out.push(Check::new("oracle", format!("{tag}_mf_vs_sparse"), worst, 1e-11));
            out.push(Check::new("oracle", format!("{tag}_sparse_symmetry"), a.asymmetry(), 1e-12));
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                let u = random_vec(&mut rng, n);
                let w = random_vec(&mut rng, n);
                op.apply(&u, &mut y)?;
                op.apply(&w, &mut z)?;
                worst = worst.max((dot(&y, &w) - dot(&u, &z)).abs() / (norm(&u) * norm(&w)));
            }
            out.push(Check::new("symmetry", format!("{tag}_mf"), worst, 1e-11));
        }
    }
    Ok(out)
}

/// `|<E u, q> - <u, I q>| / (|E u| |q|)`.
fn adjoint_defect(eu: &[f64], q: &[f64], u: &[f64], iq: &[f64]) -> f64 {
    (dot(eu, q) - dot(u, iq)).abs() / (norm(eu) * norm(q)).max(f64::MIN_POSITIVE)
}

fn lanes_to_vec<V: Lanes<f64>>(v: &[V]) -> Vec<f64> {
    v.iter().flat_map(|x| (0..V::WIDTH).map(move |l| x.lane(l))).collect()
}

/// Evaluation and integration kernels against each other.
pub fn adjoint_suite(degrees: std::ops::RangeInclusive<usize>) -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in degrees {
        let shape = ShapeInfo::<f64>::standard(p).expect("degree supported");
        let (k, nq) = (shape.k, shape.n_q);
        let (nd, np, nf, nfp) = (k * k * k, nq * nq * nq, k * k, nq * nq);
        let mut s = Scratch::<f64>::new(&shape);
        let u = random_vec(&mut rng, nd);
        // cell: values and gradients
        {
            let (mut v, mut g) = (vec![0.0; np], vec![0.0; 3 * np]);
            eval_cell(&shape, 3, &u, &mut v, &mut g, &mut s);
            let (qv, qg) = (random_vec(&mut rng, np), random_vec(&mut rng, 3 * np));
            let mut iq = vec![0.0; nd];
            integrate_cell(&shape, 3, Some(&qv), Some(&qg), &mut iq, &mut s);
            let eu: Vec<f64> = v.iter().chain(&g).copied().collect();
            let q: Vec<f64> = qv.iter().chain(&qg).copied().collect();
            out.push(Check::new("adjoint", format!("cell_p{p}"), adjoint_defect(&eu, &q, &u, &iq), 1e-12));
        }
        // faces and face DoF restriction
        let mut face = 0.0_f64;
        let mut restrict = 0.0_f64;
        let mut extra = 0.0_f64;
        for face_no in 0..6 {
            let (mut v, mut n, mut t) = (vec![0.0; nfp], vec![0.0; nfp], vec![0.0; 2 * nfp]);
            eval_face(&shape, 3, face_no, &u, &mut v, &mut n, Some(&mut t), &mut s);
            let (qv, qn, qt) = (random_vec(&mut rng, nfp), random_vec(&mut rng, nfp), random_vec(&mut rng, 2 * nfp));
            let mut iq = vec![0.0; nd];
            integrate_face(&shape, 3, face_no, Some(&qv), Some(&qn), Some(&qt), &mut iq, &mut s);
            let eu: Vec<f64> = v.iter().chain(&n).chain(&t).copied().collect();
            let q: Vec<f64> = qv.iter().chain(&qn).chain(&qt).copied().collect();
            face = face.max(adjoint_defect(&eu, &q, &u, &iq));

            let (mut fv, mut fn_) = (vec![0.0; nf], vec![0.0; nf]);
            face_dofs(&shape, 3, face_no, &u, &mut fv, &mut fn_);
            let (qv, qn) = (random_vec(&mut rng, nf), random_vec(&mut rng, nf));
            let mut iq = vec![0.0; nd];
            face_dofs_transpose(&shape, 3, face_no, Some(&qv), Some(&qn), &mut iq);
            let eu: Vec<f64> = fv.iter().chain(&fn_).copied().collect();
            let q: Vec<f64> = qv.iter().chain(&qn).copied().collect();
            restrict = restrict.max(adjoint_defect(&eu, &q, &u, &iq));

            let (dir, side) = (face_no / 2, face_no % 2);
            let mut v = vec![0.0; np];
            eval_extrapolated(&shape, 3, dir, side, &u, &mut v, &mut s);
            let q = random_vec(&mut rng, np);
            let mut iq = vec![0.0; nd];
            integrate_extrapolated(&shape, 3, dir, side, &q, &mut iq, &mut s);
            extra = extra.max(adjoint_defect(&v, &q, &u, &iq));
        }
        out.push(Check::new("adjoint", format!("face_p{p}"), face, 1e-12));
        out.push(Check::new("adjoint", format!("face_dofs_p{p}"), restrict, 1e-12));
        out.push(Check::new("adjoint", format!("extrapolated_p{p}"), extra, 1e-12));
        // arbitrary points, one lane group
        {
            let pts: Vec<[f64; 3]> = (0..POINT_LANES).map(|_| [0; 3].map(|_| rng.gen_range(0.0..1.0))).collect();
            let mut b = PointBasis::<P8>::new::<f64>(k);
            let mut ps = PointScratch::<P8>::new::<f64>(k);
            b.fill(&shape.basis, 3, &pts);
            let (v, g) = eval_point(3, &u, &b, &mut ps);
            let vv = eval_point_value(3, &u, &b, &mut ps);
            let q = random_vec(&mut rng, 4 * POINT_LANES);
            let pack = |c: usize| P8::load(&q[c * POINT_LANES..(c + 1) * POINT_LANES]);
            let mut acc = vec![P8::zero(); nd];
            integrate_point(3, pack(0), [pack(1), pack(2), pack(3)], &b, &mut acc, &mut ps);
            let mut iq = vec![0.0; nd];
            reduce_lanes(&mut acc, &mut iq);
            let eu = lanes_to_vec(&[v, g[0], g[1], g[2]]);
            out.push(Check::new("adjoint", format!("point_p{p}"), adjoint_defect(&eu, &q, &u, &iq), 1e-12));
            integrate_point_value(3, pack(0), &b, &mut acc, &mut ps);
            let mut iq = vec![0.0; nd];
            reduce_lanes(&mut acc, &mut iq);
            let d = adjoint_defect(&lanes_to_vec(&[vv]), &q[..POINT_LANES], &u, &iq);
            out.push(Check::new("adjoint", format!("point_value_p{p}"), d, 1e-12));
        }
    }
    out
}

/// Volume and area sums against exact values.
pub fn quadrature_suite() -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let unit = AxisBox::<f64>::unit(3);
    let plane = LevelSet::plane([0.6, 0.0, 0.8], 0.7)?;
    let (_, w, _) = cut_volume_points(&plane, &unit, 4, 4, Side::Inside)?;
    out.push(Check::new("quadrature", "plane_cut_volume", (w.iter().sum::<f64>() - 0.5).abs(), 1e-14));

    let sphere = LevelSet::sphere([0.013, -0.021, 0.007], 1.0)?;
    let mesh = CartesianMesh::build(3, -1.2, 2.4, 24, 0)?;
    let mut volume = 0.0;
    let mut area = 0.0;
    let mut complement: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        let b = mesh.cell_box(c);
        match cutfem_core::geometry::classify_cell(&sphere, &b, 5) {
            CellCategory::Inside => volume += b.measure(),
            CellCategory::Outside => {}
            CellCategory::Intersected => {
                let (_, wi, _) = cut_volume_points(&sphere, &b, 4, 4, Side::Inside)?;
                let (_, wo, _) = cut_volume_points(&sphere, &b, 4, 4, Side::Outside)?;
                let (_, ws, _, _) = cut_surface_points(&sphere, &b, 4, 4)?;
                let vin: f64 = wi.iter().sum();
                volume += vin;
                area += ws.iter().sum::<f64>();
                complement = complement.max((vin + wo.iter().sum::<f64>() - b.measure()).abs() / b.measure());
            }
        }
    }
    let pi = std::f64::consts::PI;
    out.push(Check::new("quadrature", "sphere_volume", (volume - 4.0 * pi / 3.0).abs(), 1e-6));
    out.push(Check::new("quadrature", "sphere_area", (area - 4.0 * pi).abs(), 1e-5));
    out.push(Check::new("quadrature", "complement", complement, 1e-12));
    Ok(out)
}

fn interpolate(f: &LocalForms<f64>, lo: [f64; 3], h: f64, q: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
    let k = f.k();
    let nodes = &f.shape.basis.nodes;
    (0..k * k * k)
        .map(|l| {
            let r = [nodes[l % k], nodes[(l / k) % k], nodes[l / (k * k)]];
            q([lo[0] + h * r[0], lo[1] + h * r[1], lo[2] + h * r[2]])
        })
        .collect()
}

/// Ghost penalty on global tensor polynomials (relative to the largest
/// entry of the polynomial's penalty scale) and on the unit jump.
pub fn ghost_suite(tau_v: f64) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in 1..=4 {
        let h = 0.37;
        let f = LocalForms::new(3, p, [h; 3], 1.0, 1.0, tau_v)?;
        let mut b = Buffers::<f64>::new(&f.shape, 3);
        let coef: Vec<[f64; 8]> = (0..3).map(|_| [0; 8].map(|_| rng.gen_range(-1.0..1.0))).collect();
        let q = |x: [f64; 3]| {
            (0..3).map(|a| (0..=p).rev().fold(0.0, |s, j| s * x[a] + coef[a][j])).product::<f64>()
        };
        let mut worst: f64 = 0.0;
        for dir in 0..3 {
            let lo1 = [0.1, -0.2, 0.4];
            let mut lo2 = lo1;
            lo2[dir] += h;
            let u1 = interpolate(&f, lo1, h, q);
            let u2 = interpolate(&f, lo2, h, q);
            let n = u1.len();
            let (mut o1, mut o2) = (vec![0.0; n], vec![0.0; n]);
            f.ghost_penalty(dir, &u1, &u2, &mut o1, &mut o2, &mut b);
            let scale = tau_v / (h * h) * h.powi(3) * u1.iter().chain(&u2).map(|x| x.abs()).fold(0.0, f64::max);
            let dev = o1.iter().chain(&o2).map(|x| x.abs()).fold(0.0, f64::max);
            worst = worst.max(dev / scale.max(f64::MIN_POSITIVE));
        }
        out.push(Check::new("ghost", format!("polynomial_p{p}"), worst, 1e-11));
    }
    for h in [1.0, 0.25] {
        let f = LocalForms::new(3, 2, [h; 3], 1.0, 1.0, tau_v)?;
        let n = f.dofs_per_cell();
        let mut b = Buffers::<f64>::new(&f.shape, 3);
        let (u1, u2) = (vec![1.0; n], vec![0.0; n]);
        let (mut o1, mut o2) = (vec![0.0; n], vec![0.0; n]);
        f.ghost_penalty(1, &u1, &u2, &mut o1, &mut o2, &mut b);
        let g = dot(&o1, &u1) + dot(&o2, &u2);
        let expected = 2.0 * tau_v * h;
        let dev = (g - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        out.push(Check::new("ghost", format!("unit_jump_h{h}"), dev, 1e-12));
    }
    Ok(out)
}

/// Instrumented count of one kernel evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelCount {
    pub points: usize,
    pub model_fmas: u64,
    pub counted_flops: u64,
}

fn tensor_points(k: usize, dims: usize) -> Vec<[f64; 3]> {
    let n = k.pow(dims as u32);
    (0..n)
        .map(|i| {
            let mut x = [0.0; 3];
            let mut r = i;
            for a in x.iter_mut().take(dims) {
                *a = ((r % k) as f64 + 0.5) / k as f64;
                r /= k;
            }
            x
        })
        .collect()
}

fn point_kernel<const W: usize>(shape: &ShapeInfo<f64>, face: bool, u: &[f64]) -> Result<(usize, u64), CliError> {
    let k = shape.k;
    let nd = if face { 2 } else { 3 };
    let pts = tensor_points(k, nd);
    let mut b = PointBasis::<Pack<f64, W>>::new::<f64>(k);
    let mut ps = PointScratch::<Pack<f64, W>>::new::<f64>(k);
    let mut sink = Pack::<f64, W>::zero();
    let ((), t) = counter::counted(|| {
        let (mut fv, mut fn_) = (vec![0.0; k * k], vec![0.0; k * k]);
        if face {
            face_dofs(shape, 3, 0, u, &mut fv, &mut fn_);
        }
        for group in pts.chunks(W) {
            b.fill(&shape.basis, nd, group);
            if face {
                let (v, g) = eval_point(2, &fv, &b, &mut ps);
                sink = sink + v + g[0] + g[1] + eval_point_value(2, &fn_, &b, &mut ps);
            } else {
                let (v, g) = eval_point(3, u, &b, &mut ps);
                sink = sink + v + g[0] + g[1] + g[2];
            }
        }
    })?;
    std::hint::black_box(sink);
    Ok((pts.len().div_ceil(W) * W, t.kernel))
}

/// Evaluation of values and gradients with the structured kernels (scalar
/// lanes) or the point kernels (`lanes` points at a time, full tensor rule
/// with `p + 1` points per direction).
pub fn kernel_flops(kind: KernelKind, p: usize, lanes: usize) -> Result<KernelCount, CliError> {
    let shape = ShapeInfo::<f64>::standard(p)?;
    let (k, nq) = (shape.k, shape.n_q);
    let u: Vec<f64> = (0..k * k * k).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut s = Scratch::<f64>::new(&shape);
    let (points, counted) = match kind {
        KernelKind::StructuredCell => {
            let (mut v, mut g) = (vec![0.0; nq.pow(3)], vec![0.0; 3 * nq.pow(3)]);
            let ((), t) = counter::counted(|| eval_cell(&shape, 3, &u, &mut v, &mut g, &mut s))?;
            (nq.pow(3), t.kernel)
        }
        KernelKind::StructuredFace => {
            let (mut v, mut n, mut tg) = (vec![0.0; nq * nq], vec![0.0; nq * nq], vec![0.0; 2 * nq * nq]);
            let ((), t) = counter::counted(|| eval_face(&shape, 3, 1, &u, &mut v, &mut n, Some(&mut tg), &mut s))?;
            (nq * nq, t.kernel)
        }
        KernelKind::UnstructuredCell | KernelKind::UnstructuredFace => {
            let face = kind == KernelKind::UnstructuredFace;
            cutfem_core::dispatch_lanes!(lanes, W => point_kernel::<W>(&shape, face, &u)?, _ => {
                return Err(cutfem_core::Error::UnsupportedLanes(lanes).into())
            })
        }
    };
    let model_fmas = match kind {
        KernelKind::UnstructuredCell => unstructured_cell_fmas(k, points),
        KernelKind::UnstructuredFace => unstructured_face_fmas(k, points),
        _ => model_kernel_fmas(kind, k, nq),
    };
    Ok(KernelCount { points, model_fmas, counted_flops: counted })
}

/// Counted FLOPs against twice the FMA model: exact for the structured
/// kernels, at most 10 % above for the point kernels (model taken at the
/// padded point count).
pub fn kernel_count_suite(lanes: usize) -> Result<Vec<Check>, CliError> {
    if !counter::ENABLED {
        return Ok(vec![Check::skipped("counts", "instrumentation disabled")]);
    }
    let mut out = Vec::new();
    for (name, kind, tol) in [
        ("structured_cell", KernelKind::StructuredCell, 0.0),
        ("structured_face", KernelKind::StructuredFace, 0.0),
        ("unstructured_cell", KernelKind::UnstructuredCell, 0.1),
        ("unstructured_face", KernelKind::UnstructuredFace, 0.1),
    ] {
        for p in 1..=4 {
            let c = kernel_flops(kind, p, lanes)?;
            let excess = c.counted_flops as f64 / (2 * c.model_fmas) as f64 - 1.0;
            // counting less than the model is as wrong as counting more
            let value = if excess < 0.0 { f64::INFINITY } else { excess };
            out.push(Check::new("counts", format!("{name}_p{p}"), value, tol));
        }
    }
    Ok(out)
}
