//! Matrix-free CG and DG Poisson operators on cut Cartesian meshes.
//!
//! Cells fully inside the domain and uncut interior faces are processed
//! with sum factorization, lanes over cells or faces. Intersected cells and
//! cut faces are processed one at a time with lanes over their quadrature
//! points. Dirichlet conditions on the interface are imposed with Nitsche's
//! method and cut cells are stabilized with a volume ghost penalty on one
//! face per cut cell.
//!
//! Work is split into colour classes whose entities never write to the same
//! DoF. Colours run one after another and the batches of one colour are
//! spread over the rayon workers, so the result does not depend on the
//! worker count.

pub mod local;
pub mod sparse;

use std::ops::Range;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::dispatch_lanes;
use crate::error::{Error, Result};
use crate::geometry::{CellCategory, FaceCategory, LevelSet};
use crate::kernels::counter::{self, FlopTally};
use crate::lanes::{Lanes, Pack};
use crate::mesh::batches::{cell_batches, check_lanes, face_batches, CellBatch, FaceBatch};
use crate::mesh::dofs::{select_stabilization_faces, DofHandler, FeKind, INVALID};
use crate::mesh::partition::split_weighted;
use crate::quadrature::cut::{cut_cell_rule, cut_face_rule, DEFAULT_MAX_SUBDIV};
use crate::quadrature::TensorQuadrature;
use crate::scalar::Real;

use local::{Buffers, LocalForms, PackedCellRule, PackedFaceRule};

/// Relative cost of an intersected cell or cut face in the work split.
const CUT_WEIGHT: u64 = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorConfig<T> {
    pub fe: FeKind,
    pub degree: usize,
    /// Nitsche penalty; enters as `tau_d / h`.
    pub tau_d: T,
    /// SIPG penalty; enters as `gamma / h`.
    pub gamma: T,
    /// Ghost-penalty factor; enters as `tau_v / h^2`.
    pub tau_v: T,
    pub lanes: usize,
    pub max_subdiv: usize,
    /// Gauss points per direction of the cut rules; `None` uses `p + 1`.
    pub cut_points: Option<usize>,
    /// Process inside cells and uncut faces with the per-point kernels too.
    pub force_unstructured: bool,
    /// Fault injection: reverses the sign of the Nitsche symmetry term.
    pub flip_nitsche_symmetry: bool,
}

impl<T: Real> OperatorConfig<T> {
    /// Defaults: `tau_d = gamma = 5 (p+1)^2`, `tau_v = 1`, 8 lanes.
    pub fn new(fe: FeKind, degree: usize) -> Self {
        let pen = T::of(5.0 * ((degree + 1) * (degree + 1)) as f64);
        Self {
            fe,
            degree,
            tau_d: pen,
            gamma: pen,
            tau_v: T::one(),
            lanes: 8,
            max_subdiv: DEFAULT_MAX_SUBDIV,
            cut_points: None,
            force_unstructured: false,
            flip_nitsche_symmetry: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_d > T::zero()) || !(self.gamma > T::zero()) {
            return Err(Error::Config("tau_d and gamma must be positive".into()));
        }
        if !(self.tau_v >= T::zero()) {
            return Err(Error::Config("tau_v must be non-negative".into()));
        }
        if !(1..=7).contains(&self.degree) {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        if self.cut_points.is_some_and(|n| !(1..=crate::quadrature::MAX_GAUSS_POINTS).contains(&n)) {
            return Err(Error::UnsupportedRule(self.cut_points.unwrap_or(0)));
        }
        check_lanes(self.lanes)
    }
}

/// Quadrature data of the cut entities, padded for the configured lanes.
#[derive(Clone, Debug)]
pub struct GeometryTables<T> {
    /// Index into `cell_rules` per active cell, `INVALID` if not cut.
    pub cut_of_cell: Vec<u32>,
    pub cell_rules: Vec<PackedCellRule<T>>,
    /// `|cell ∩ Ω| / |cell|` per cut cell.
    pub volume_fraction: Vec<T>,
    /// Index into `face_rules` per entry of `DofHandler::faces` (DG only).
    pub cut_of_face: Vec<u32>,
    pub face_rules: Vec<PackedFaceRule<T>>,
    /// Ghost-penalty faces, indices into `DofHandler::faces`.
    pub stabilization: Vec<u32>,
    /// Full-cell and full-face rules for the forced unstructured path.
    pub tensor_cell: PackedCellRule<T>,
    pub tensor_faces: Vec<PackedFaceRule<T>>,
    /// Cut entities whose rule used the low-order fallback.
    pub low_order_entities: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Item {
    Cells(CellBatch),
    Sipg(FaceBatch),
    SipgCut(FaceBatch),
    Ghost(FaceBatch),
}

impl Item {
    fn weight(&self, handler_cut: impl Fn(&CellBatch) -> bool) -> u64 {
        match self {
            Item::Cells(b) if handler_cut(b) => CUT_WEIGHT * b.len as u64,
            Item::Cells(b) => b.len as u64,
            Item::Sipg(b) | Item::Ghost(b) => b.len as u64,
            Item::SipgCut(b) => CUT_WEIGHT * b.len as u64,
        }
    }
}

#[derive(Clone, Debug)]
struct Colour {
    items: Vec<Item>,
    weights: Vec<u64>,
}

/// Destination vector shared by the workers of one colour.
struct SharedDst<T> {
    ptr: *mut T,
    len: usize,
}

// Workers of one colour touch disjoint index sets (see the colouring).
unsafe impl<T: Send> Send for SharedDst<T> {}
unsafe impl<T: Send> Sync for SharedDst<T> {}

impl<T: Real> SharedDst<T> {
    #[inline(always)]
    fn add(&self, i: usize, v: T) {
        assert!(i < self.len);
        // SAFETY: in bounds; no other worker writes index `i` during this colour
        unsafe { *self.ptr.add(i) += v }
    }
}

pub struct PoissonOperator<T> {
    handler: DofHandler<T>,
    config: OperatorConfig<T>,
    forms: LocalForms<T>,
    tables: GeometryTables<T>,
    colours: Vec<Colour>,
}

impl<T: Real> PoissonOperator<T> {
    pub fn new(handler: DofHandler<T>, ls: &LevelSet<T>, config: OperatorConfig<T>) -> Result<Self> {
        config.validate()?;
        if config.fe != handler.fe || config.degree != handler.degree {
            return Err(Error::Config(format!(
                "operator configured for {} p={} but DoF handler is {} p={}",
                config.fe.name(),
                config.degree,
                handler.fe.name(),
                handler.degree
            )));
        }
        let dim = handler.dim();
        let mut forms = LocalForms::new(dim, handler.degree, handler.mesh.h, config.tau_d, config.gamma, config.tau_v)?;
        forms.flip_nitsche_symmetry = config.flip_nitsche_symmetry;
        let tables = build_tables(&handler, ls, &config, &forms)?;
        let colours = build_colours(&handler, &tables, config.lanes)?;
        Ok(Self { handler, config, forms, tables, colours })
    }

    pub fn handler(&self) -> &DofHandler<T> {
        &self.handler
    }

    pub fn config(&self) -> &OperatorConfig<T> {
        &self.config
    }

    pub fn forms(&self) -> &LocalForms<T> {
        &self.forms
    }

    pub fn tables(&self) -> &GeometryTables<T> {
        &self.tables
    }

    pub fn n_dofs(&self) -> usize {
        self.handler.n_dofs
    }

    fn is_cut_cell(&self, a: u32) -> bool {
        self.handler.category_of(a as usize) == CellCategory::Intersected
    }

    /// `dst = A src`.
    pub fn apply(&self, src: &[T], dst: &mut [T]) -> Result<()> {
        let n = self.n_dofs();
        for v in [src.len(), dst.len()] {
            if v != n {
                return Err(Error::DimensionMismatch { expected: n, got: v });
            }
        }
        dst.iter_mut().for_each(|x| *x = T::zero());
        dispatch_lanes!(self.config.lanes, W => self.apply_lanes::<W>(src, dst), _ => unreachable!());
        Ok(())
    }

    fn apply_lanes<const W: usize>(&self, src: &[T], dst: &mut [T]) {
        let shared = SharedDst { ptr: dst.as_mut_ptr(), len: dst.len() };
        let workers = rayon::current_num_threads();
        let tallies = Mutex::new(FlopTally::default());
        for colour in &self.colours {
            if workers == 1 || colour.items.len() < 2 {
                self.run_items::<W>(&colour.items, src, &shared);
                continue;
            }
            let ranges: Vec<Range<usize>> = split_weighted(&colour.weights, workers);
            rayon::scope(|s| {
                for r in ranges.into_iter().filter(|r| !r.is_empty()) {
                    let (shared, tallies) = (&shared, &tallies);
                    s.spawn(move |_| {
                        let (_, t) = counter::isolated(|| self.run_items::<W>(&colour.items[r], src, shared));
                        *tallies.lock().unwrap() += t;
                    });
                }
            });
        }
        counter::add_local(tallies.into_inner().unwrap());
    }

    fn run_items<const W: usize>(&self, items: &[Item], src: &[T], dst: &SharedDst<T>) {
        let mut ws = Workspace::<T, W>::new(&self.forms);
        for item in items {
            match item {
                Item::Cells(b) => self.cell_batch(b, src, dst, &mut ws),
                Item::Sipg(b) => self.face_batch(b, false, src, dst, &mut ws),
                Item::Ghost(b) => self.face_batch(b, true, src, dst, &mut ws),
                Item::SipgCut(b) => {
                    for &f in b.lanes() {
                        self.cut_face(f as usize, src, dst, &mut ws);
                    }
                }
            }
        }
    }

    fn cell_batch<const W: usize>(&self, b: &CellBatch, src: &[T], dst: &SharedDst<T>, ws: &mut Workspace<T, W>) {
        let h = &self.handler;
        let nd = h.dofs_per_cell();
        if b.category == CellCategory::Inside && !self.config.force_unstructured {
            gather(h, b.lanes(), src, &mut ws.u[0][..nd]);
            self.forms.cell_structured(&ws.u[0][..nd], &mut ws.o[0][..nd], &mut ws.buf);
            scatter(h, b.lanes(), &ws.o[0][..nd], dst);
            return;
        }
        for &a in b.lanes() {
            let rule = self.cell_rule(a);
            let dofs = h.dofs_of(a as usize);
            for (x, &g) in ws.su[0].iter_mut().zip(dofs) {
                *x = src[g as usize];
            }
            ws.so[0][..nd].iter_mut().for_each(|x| *x = T::zero());
            self.forms.cell_unstructured(rule, &ws.su[0][..nd], &mut ws.so[0][..nd], &mut ws.buf);
            for (&x, &g) in ws.so[0].iter().zip(dofs) {
                dst.add(g as usize, x);
            }
        }
    }

    fn cell_rule(&self, a: u32) -> &PackedCellRule<T> {
        match self.tables.cut_of_cell[a as usize] {
            INVALID => &self.tables.tensor_cell,
            c => &self.tables.cell_rules[c as usize],
        }
    }

    fn face_batch<const W: usize>(
        &self,
        b: &FaceBatch,
        ghost: bool,
        src: &[T],
        dst: &SharedDst<T>,
        ws: &mut Workspace<T, W>,
    ) {
        let h = &self.handler;
        let nd = h.dofs_per_cell();
        if !ghost && self.config.force_unstructured {
            for &f in b.lanes() {
                self.cut_face(f as usize, src, dst, ws);
            }
            return;
        }
        let mut minus = [0u32; 16];
        let mut plus = [0u32; 16];
        for (i, &f) in b.lanes().iter().enumerate() {
            minus[i] = h.faces[f as usize].minus;
            plus[i] = h.faces[f as usize].plus;
        }
        let (minus, plus) = (&minus[..b.len], &plus[..b.len]);
        let [u0, u1] = &mut ws.u;
        gather(h, minus, src, &mut u0[..nd]);
        gather(h, plus, src, &mut u1[..nd]);
        let [o0, o1] = &mut ws.o;
        if ghost {
            self.forms.ghost_penalty(b.dir, &u0[..nd], &u1[..nd], &mut o0[..nd], &mut o1[..nd], &mut ws.buf);
        } else {
            self.forms.face_structured(b.dir, &u0[..nd], &u1[..nd], &mut o0[..nd], &mut o1[..nd], &mut ws.buf);
        }
        scatter(h, minus, &o0[..nd], dst);
        scatter(h, plus, &o1[..nd], dst);
    }

    fn face_rule(&self, f: usize) -> &PackedFaceRule<T> {
        match self.tables.cut_of_face[f] {
            INVALID => &self.tables.tensor_faces[self.handler.faces[f].dir],
            c => &self.tables.face_rules[c as usize],
        }
    }

    fn cut_face<const W: usize>(&self, f: usize, src: &[T], dst: &SharedDst<T>, ws: &mut Workspace<T, W>) {
        let h = &self.handler;
        let nd = h.dofs_per_cell();
        let face = &h.faces[f];
        let dm = h.dofs_of(face.minus as usize);
        let dp = h.dofs_of(face.plus as usize);
        let [s0, s1] = &mut ws.su;
        let [r0, r1] = &mut ws.so;
        for i in 0..nd {
            s0[i] = src[dm[i] as usize];
            s1[i] = src[dp[i] as usize];
            r0[i] = T::zero();
            r1[i] = T::zero();
        }
        self.forms.face_unstructured(self.face_rule(f), face.dir, &s0[..nd], &s1[..nd], &mut r0[..nd], &mut r1[..nd], &mut ws.buf);
        for i in 0..nd {
            dst.add(dm[i] as usize, r0[i]);
            dst.add(dp[i] as usize, r1[i]);
        }
    }

    /// Dense local matrices of every cell and face contribution, in a fixed
    /// order, handed to `visit(dofs, matrix)` with the matrix stored column
    /// by column (`m[j * n + i]` is row `i`, column `j`).
    pub fn for_each_block(&self, mut visit: impl FnMut(&[u32], &[T])) {
        dispatch_lanes!(self.config.lanes, W => self.blocks_lanes::<W>(&mut visit), _ => unreachable!())
    }

    fn blocks_lanes<const W: usize>(&self, visit: &mut dyn FnMut(&[u32], &[T])) {
        let h = &self.handler;
        let nd = h.dofs_per_cell();
        let mut ws = Workspace::<T, W>::new(&self.forms);
        let structured_cell = self.local_cell_block::<T, W>(None);
        let mut pair = vec![0u32; 2 * nd];
        let chunk = 256;
        // cells
        let active: Vec<u32> = (0..h.n_active() as u32).collect();
        for part in active.chunks(chunk) {
            let blocks: Vec<Option<Vec<T>>> = part
                .par_iter()
                .map(|&a| {
                    (self.is_cut_cell(a) || self.config.force_unstructured)
                        .then(|| self.local_cell_block::<T, W>(Some(self.cell_rule(a))))
                })
                .collect();
            for (&a, blk) in part.iter().zip(&blocks) {
                visit(h.dofs_of(a as usize), blk.as_ref().unwrap_or(&structured_cell));
            }
        }
        // interior faces (DG)
        if h.fe == FeKind::Dg {
            let dim = h.dim();
            let structured: Vec<Vec<T>> =
                (0..dim).map(|dir| self.local_face_block(dir, false, &mut ws)).collect();
            let faces: Vec<u32> =
                (0..h.faces.len() as u32).filter(|&f| h.faces[f as usize].category != FaceCategory::Outside).collect();
            for part in faces.chunks(chunk) {
                let blocks: Vec<Option<Vec<T>>> = part
                    .par_iter()
                    .map(|&f| {
                        let cut = self.tables.cut_of_face[f as usize] != INVALID || self.config.force_unstructured;
                        cut.then(|| self.local_cut_face_block::<W>(f as usize))
                    })
                    .collect();
                for (&f, blk) in part.iter().zip(&blocks) {
                    let face = &h.faces[f as usize];
                    pair[..nd].copy_from_slice(h.dofs_of(face.minus as usize));
                    pair[nd..].copy_from_slice(h.dofs_of(face.plus as usize));
                    visit(&pair, blk.as_ref().unwrap_or(&structured[face.dir]));
                }
            }
        }
        // ghost penalty
        let ghost: Vec<Vec<T>> = (0..h.dim()).map(|dir| self.local_face_block(dir, true, &mut ws)).collect();
        for &f in &self.tables.stabilization {
            let face = &h.faces[f as usize];
            pair[..nd].copy_from_slice(h.dofs_of(face.minus as usize));
            pair[nd..].copy_from_slice(h.dofs_of(face.plus as usize));
            visit(&pair, &ghost[face.dir]);
        }
    }

    fn local_cell_block<V: Lanes<T>, const W: usize>(&self, rule: Option<&PackedCellRule<T>>) -> Vec<T> {
        let nd = self.handler.dofs_per_cell();
        let mut m = vec![T::zero(); nd * nd];
        let mut e = vec![T::zero(); nd];
        match rule {
            None => {
                let mut b = Buffers::<T>::new(&self.forms.shape, self.forms.dim);
                for j in 0..nd {
                    e[j] = T::one();
                    self.forms.cell_structured(&e, &mut m[j * nd..(j + 1) * nd], &mut b);
                    e[j] = T::zero();
                }
            }
            Some(r) => {
                let mut b = Buffers::<Pack<T, W>>::new(&self.forms.shape, self.forms.dim);
                for j in 0..nd {
                    e[j] = T::one();
                    self.forms.cell_unstructured(r, &e, &mut m[j * nd..(j + 1) * nd], &mut b);
                    e[j] = T::zero();
                }
            }
        }
        m
    }

    fn local_face_block<const W: usize>(&self, dir: usize, ghost: bool, _ws: &mut Workspace<T, W>) -> Vec<T> {
        let nd = self.handler.dofs_per_cell();
        let n2 = 2 * nd;
        let mut m = vec![T::zero(); n2 * n2];
        let mut e = vec![T::zero(); n2];
        let mut b = Buffers::<T>::new(&self.forms.shape, self.forms.dim);
        for j in 0..n2 {
            e[j] = T::one();
            let (um, up) = e.split_at(nd);
            let (om, op) = m[j * n2..(j + 1) * n2].split_at_mut(nd);
            if ghost {
                self.forms.ghost_penalty(dir, um, up, om, op, &mut b);
            } else {
                self.forms.face_structured(dir, um, up, om, op, &mut b);
            }
            e[j] = T::zero();
        }
        m
    }

    fn local_cut_face_block<const W: usize>(&self, f: usize) -> Vec<T> {
        let nd = self.handler.dofs_per_cell();
        let n2 = 2 * nd;
        let mut m = vec![T::zero(); n2 * n2];
        let mut e = vec![T::zero(); n2];
        let mut b = Buffers::<Pack<T, W>>::new(&self.forms.shape, self.forms.dim);
        let rule = self.face_rule(f);
        let dir = self.handler.faces[f].dir;
        for j in 0..n2 {
            e[j] = T::one();
            let (um, up) = e.split_at(nd);
            let (om, op) = m[j * n2..(j + 1) * n2].split_at_mut(nd);
            self.forms.face_unstructured(rule, dir, um, up, om, op, &mut b);
            e[j] = T::zero();
        }
        m
    }

    /// Diagonal of the operator from the diagonals of the local matrices.
    pub fn diagonal(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n_dofs()];
        self.for_each_block(|dofs, m| {
            let n = dofs.len();
            // the two cells of a CG face share DoFs
            for (i, &g) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    if gj == g {
                        d[g as usize] += m[j * n + i];
                    }
                }
            }
        });
        d
    }

    /// Load vector for `-Δu = f` in Ω, `u = g` on Γ: `(f, v)` plus the
    /// Nitsche data terms. `f` and `g` take physical coordinates.
    pub fn assemble_rhs(&self, f: impl Fn(&[T; 3]) -> T + Sync, g: impl Fn(&[T; 3]) -> T + Sync) -> Vec<T> {
        let h = &self.handler;
        let nd = h.dofs_per_cell();
        let dim = h.dim();
        let tensor = TensorQuadrature::<T>::gauss(dim, self.forms.shape.n_q).expect("supported rule");
        let local: Vec<Vec<T>> = (0..h.n_active())
            .into_par_iter()
            .map_init(
                || Buffers::<T>::new(&self.forms.shape, dim),
                |b, a| {
                    let cell = h.active[a];
                    let mut out = vec![T::zero(); nd];
                    let to_phys = |r: &[T; 3]| h.mesh.map_point(cell, r);
                    match self.tables.cut_of_cell[a] {
                        INVALID => {
                            let fv: Vec<T> = tensor.points.iter().map(|r| f(&to_phys(r))).collect();
                            self.forms.rhs_structured(&fv, &mut out, b);
                        }
                        c => {
                            let rule = &self.tables.cell_rules[c as usize];
                            let fv: Vec<T> =
                                rule.volume_points[..rule.n_volume].iter().map(|r| f(&to_phys(r))).collect();
                            let gv: Vec<T> =
                                rule.surface_points[..rule.n_surface].iter().map(|r| g(&to_phys(r))).collect();
                            self.forms.rhs_unstructured(rule, &fv, &gv, &mut out, b);
                        }
                    }
                    out
                },
            )
            .collect();
        let mut rhs = vec![T::zero(); self.n_dofs()];
        for (a, out) in local.iter().enumerate() {
            for (&g, &v) in h.dofs_of(a).iter().zip(out) {
                rhs[g as usize] += v;
            }
        }
        rhs
    }
}

/// Per-worker gather/scatter arrays and kernel buffers.
struct Workspace<T, const W: usize> {
    buf: Buffers<Pack<T, W>>,
    u: [Vec<Pack<T, W>>; 2],
    o: [Vec<Pack<T, W>>; 2],
    su: [Vec<T>; 2],
    so: [Vec<T>; 2],
}

impl<T: Real, const W: usize> Workspace<T, W> {
    fn new(forms: &LocalForms<T>) -> Self {
        let nd = forms.dofs_per_cell();
        let z = Pack::<T, W>::default();
        Self {
            buf: Buffers::new(&forms.shape, forms.dim),
            u: [vec![z; nd], vec![z; nd]],
            o: [vec![z; nd], vec![z; nd]],
            su: [vec![T::zero(); nd], vec![T::zero(); nd]],
            so: [vec![T::zero(); nd], vec![T::zero(); nd]],
        }
    }
}

fn gather<T: Real, const W: usize>(h: &DofHandler<T>, cells: &[u32], src: &[T], u: &mut [Pack<T, W>]) {
    u.iter_mut().for_each(|x| *x = Pack::default());
    for (lane, &a) in cells.iter().enumerate() {
        for (x, &g) in u.iter_mut().zip(h.dofs_of(a as usize)) {
            x.0[lane] = src[g as usize];
        }
    }
}

fn scatter<T: Real, const W: usize>(h: &DofHandler<T>, cells: &[u32], o: &[Pack<T, W>], dst: &SharedDst<T>) {
    for (lane, &a) in cells.iter().enumerate() {
        for (x, &g) in o.iter().zip(h.dofs_of(a as usize)) {
            dst.add(g as usize, x.0[lane]);
        }
    }
}

fn build_tables<T: Real>(
    handler: &DofHandler<T>,
    ls: &LevelSet<T>,
    config: &OperatorConfig<T>,
    forms: &LocalForms<T>,
) -> Result<GeometryTables<T>> {
    let mesh = &handler.mesh;
    let dim = handler.dim();
    let n_q = config.cut_points.unwrap_or(forms.shape.n_q);
    let lanes = config.lanes;
    let cut_cells: Vec<usize> =
        (0..handler.n_active()).filter(|&a| handler.category_of(a) == CellCategory::Intersected).collect();
    let raw: Vec<_> = cut_cells
        .par_iter()
        .map(|&a| cut_cell_rule(ls, &mesh.cell_box(handler.active[a]), n_q, config.max_subdiv))
        .collect::<Result<Vec<_>>>()?;
    let mut cut_of_cell = vec![INVALID; handler.n_active()];
    for (i, &a) in cut_cells.iter().enumerate() {
        cut_of_cell[a] = i as u32;
    }
    let volume_fraction: Vec<T> = cut_cells
        .iter()
        .zip(&raw)
        .map(|(&a, r)| r.volume_jxw.iter().copied().sum::<T>() / mesh.cell_box(handler.active[a]).measure())
        .collect();
    let mut low_order_entities = raw.iter().filter(|r| r.low_order).count();
    let cell_rules = raw.iter().map(|r| PackedCellRule::pack(r, lanes)).collect();
    let mut cut_of_face = vec![INVALID; handler.faces.len()];
    let mut face_rules = Vec::new();
    if handler.fe == FeKind::Dg {
        let cut_faces: Vec<usize> =
            (0..handler.faces.len()).filter(|&f| handler.faces[f].category == FaceCategory::Cut).collect();
        let raw: Vec<_> = cut_faces
            .par_iter()
            .map(|&f| cut_face_rule(ls, &mesh.face_box(handler.faces[f].face), n_q, config.max_subdiv))
            .collect::<Result<Vec<_>>>()?;
        low_order_entities += raw.iter().filter(|r| r.low_order).count();
        for (i, &f) in cut_faces.iter().enumerate() {
            cut_of_face[f] = i as u32;
        }
        face_rules = raw.iter().map(|r| PackedFaceRule::pack(r, lanes)).collect();
    }
    let stabilization = select_stabilization_faces(handler, |a| volume_fraction[cut_of_cell[a] as usize])?
        .into_iter()
        .map(|f| f as u32)
        .collect();
    let n_q = forms.shape.n_q;
    let tensor_cell = PackedCellRule::tensor(dim, n_q, mesh.h, lanes)?;
    let tensor_faces = (0..dim).map(|dir| PackedFaceRule::tensor(dim, dir, n_q, mesh.h, lanes)).collect::<Result<_>>()?;
    Ok(GeometryTables {
        cut_of_cell,
        cell_rules,
        volume_fraction,
        cut_of_face,
        face_rules,
        stabilization,
        tensor_cell,
        tensor_faces,
        low_order_entities,
    })
}

/// Colour classes: entities of one class never share a DoF.
fn build_colours<T: Real>(handler: &DofHandler<T>, tables: &GeometryTables<T>, lanes: usize) -> Result<Vec<Colour>> {
    let mesh = &handler.mesh;
    let dim = handler.dim();
    let cg = handler.fe == FeKind::Cg;
    let coords = |a: u32| mesh.cell_coords(handler.active[a as usize]);
    let parity = |c: [usize; 3], skip: usize| {
        (0..dim).filter(|&a| a != skip).enumerate().fold(0, |s, (j, a)| s | ((c[a] & 1) << j))
    };
    let is_cut = |b: &CellBatch| b.category == CellCategory::Intersected;
    let mut colours = Vec::new();
    let finish = |items: Vec<Item>| {
        let weights = items.iter().map(|i| i.weight(is_cut)).collect();
        Colour { items, weights }
    };
    // cells
    let n_cell_colours = if cg { 1 << dim } else { 1 };
    let mut groups = vec![Vec::new(); n_cell_colours];
    for a in 0..handler.n_active() as u32 {
        let c = if cg { parity(coords(a), usize::MAX) } else { 0 };
        groups[c].push(a);
    }
    for g in groups {
        let items = cell_batches(handler, &g, lanes)?.into_iter().map(Item::Cells).collect();
        colours.push(finish(items));
    }
    // interior penalty faces, two classes per direction
    if !cg {
        let mut groups = vec![Vec::new(); 2 * dim];
        for (f, face) in handler.faces.iter().enumerate() {
            if face.category == FaceCategory::Outside {
                continue;
            }
            groups[2 * face.dir + (coords(face.minus)[face.dir] & 1)].push(f as u32);
        }
        for g in groups {
            let (cut, full): (Vec<u32>, Vec<u32>) = g.iter().partition(|&&f| tables.cut_of_face[f as usize] != INVALID);
            let mut items: Vec<Item> = face_batches(handler, &full, lanes)?.into_iter().map(Item::Sipg).collect();
            items.extend(face_batches(handler, &cut, lanes)?.into_iter().map(Item::SipgCut));
            colours.push(finish(items));
        }
    }
    // ghost penalty faces
    let per_dir = if cg { 3 << (dim - 1) } else { 2 };
    let mut groups = vec![Vec::new(); per_dir * dim];
    for &f in &tables.stabilization {
        let face = &handler.faces[f as usize];
        let c = coords(face.minus);
        let class = if cg { (c[face.dir] % 3) * (1 << (dim - 1)) + parity(c, face.dir) } else { c[face.dir] & 1 };
        groups[face.dir * per_dir + class].push(f);
    }
    for g in groups {
        let items = face_batches(handler, &g, lanes)?.into_iter().map(Item::Ghost).collect();
        colours.push(finish(items));
    }
    colours.retain(|c| !c.items.is_empty());
    Ok(colours)
}

#[cfg(test)]
mod tests;
