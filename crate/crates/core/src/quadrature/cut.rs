//! Quadrature on cut cells and faces by recursive dimension reduction.
//!
//! A box is reduced one axis at a time: along a height axis in which every
//! active function is monotone, the integration domain between the bottom
//! and top faces is described by the roots on each height line, and the
//! remaining (lower-dimensional) base domain is integrated recursively with
//! the restrictions of the functions to the bottom and top faces. Boxes
//! without a usable height axis are bisected up to `max_subdiv` times;
//! after that a low-order indicator rule is used and the result is flagged.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::geometry::{AxisBox, LevelSet};
use crate::quadrature::root::{find_roots, MAX_ROOTS_PER_LINE};
use crate::quadrature::{gauss_rule, Quadrature1D};
use crate::scalar::{norm, Real};

pub const DEFAULT_MAX_SUBDIV: usize = 4;

/// Samples per axis of the grid on which monotonicity is checked.
const MONOTONE_SAMPLES: usize = 5;

/// Smallest accepted `|d phi / dx_k| / |grad phi|` on the sample grid
/// before a box is subdivided instead.
const MIN_SLOPE: f64 = 0.2;

/// Which part of a cell to integrate over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `phi < 0`, the physical domain.
    Inside,
    /// `phi > 0`.
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cond {
    Neg,
    Pos,
    Any,
}

impl Cond {
    fn holds<T: Real>(self, v: T) -> bool {
        match self {
            Cond::Neg => v < T::zero(),
            Cond::Pos => v > T::zero(),
            Cond::Any => true,
        }
    }

    fn with_sign(s: i8) -> Self {
        if s < 0 {
            Cond::Neg
        } else {
            Cond::Pos
        }
    }

    fn sign(self) -> i8 {
        match self {
            Cond::Neg => -1,
            Cond::Pos => 1,
            Cond::Any => 0,
        }
    }
}

/// The level set with some coordinates frozen to face values.
#[derive(Clone, Copy)]
struct Psi<'a, T> {
    ls: &'a LevelSet<T>,
    fixed: [Option<T>; 3],
}

impl<'a, T: Real> Psi<'a, T> {
    fn point(&self, x: &[T; 3]) -> [T; 3] {
        let mut p = *x;
        for a in 0..3 {
            if let Some(v) = self.fixed[a] {
                p[a] = v;
            }
        }
        p
    }

    fn eval(&self, x: &[T; 3]) -> T {
        self.ls.eval(&self.point(x))
    }

    fn grad(&self, x: &[T; 3]) -> [T; 3] {
        self.ls.raw_gradient(&self.point(x))
    }

    fn fix(&self, axis: usize, v: T) -> Self {
        let mut f = *self;
        f.fixed[axis] = Some(v);
        f
    }
}

struct Ctx<T> {
    rule: Quadrature1D<T>,
    max_subdiv: usize,
    low_order: Cell<bool>,
}

type Emit<'e, T> = dyn FnMut([T; 3], T) + 'e;

impl<T: Real> Ctx<T> {
    fn new(n_q: usize, max_subdiv: usize) -> Result<Self> {
        Ok(Self { rule: gauss_rule(n_q)?, max_subdiv, low_order: Cell::new(false) })
    }

    fn tensor(&self, bx: &AxisBox<T>, emit: &mut Emit<'_, T>) {
        let axes = bx.free_axes();
        let n = self.rule.len();
        let total = n.pow(axes.len() as u32);
        for idx in 0..total {
            let mut x = bx.lo;
            let mut w = T::one();
            let mut rem = idx;
            for &a in &axes {
                let i = rem % n;
                rem /= n;
                let len = bx.hi[a] - bx.lo[a];
                x[a] = bx.lo[a] + len * self.rule.points[i];
                w *= len * self.rule.weights[i];
            }
            emit(x, w);
        }
    }

    /// Gauss points on every sub-interval of the line through `x` along
    /// `axis` on which all conditions hold.
    fn line(
        &self,
        funcs: &[Psi<'_, T>],
        conds: &[Cond],
        x: [T; 3],
        axis: usize,
        lo: T,
        hi: T,
        weight: T,
        emit: &mut Emit<'_, T>,
    ) -> Result<()> {
        let mut breaks = vec![lo, hi];
        let mut roots = Vec::new();
        for f in funcs {
            let g = |t: T| {
                let mut p = x;
                p[axis] = t;
                f.eval(&p)
            };
            let dg = |t: T| {
                let mut p = x;
                p[axis] = t;
                f.grad(&p)[axis]
            };
            find_roots(&g, &dg, lo, hi, &mut roots)?;
            breaks.extend(roots.iter().copied());
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let half = T::of(0.5);
        for seg in breaks.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = b - a;
            if !(len > T::zero()) {
                continue;
            }
            let mut mid = x;
            mid[axis] = (a + b) * half;
            if !funcs.iter().zip(conds).all(|(f, c)| c.holds(f.eval(&mid))) {
                continue;
            }
            for (&t, &w) in self.rule.points.iter().zip(&self.rule.weights) {
                let mut p = x;
                p[axis] = a + len * t;
                let ww = weight * len * w;
                if ww > T::zero() {
                    emit(p, ww);
                }
            }
        }
        Ok(())
    }

    /// Height axis for `funcs` on `bx`: a free axis in which every function
    /// is strictly monotone on the sample grid, preferring the one whose
    /// derivative is largest relative to the gradient. Axes where that
    /// ratio drops below [`MIN_SLOPE`] give steep height functions and are
    /// rejected unless `accept_steep`. Returns the axis and derivative signs.
    fn height_axis(&self, funcs: &[Psi<'_, T>], bx: &AxisBox<T>, accept_steep: bool) -> Option<(usize, Vec<i8>)> {
        let axes = bx.free_axes();
        let c = bx.center();
        let g0 = funcs[0].grad(&c);
        let mut order = axes.clone();
        order.sort_by(|&a, &b| g0[b].abs().partial_cmp(&g0[a].abs()).unwrap().then(a.cmp(&b)));
        let n = MONOTONE_SAMPLES;
        let total = n.pow(axes.len() as u32);
        let grads: Vec<Vec<[T; 3]>> = funcs
            .iter()
            .map(|f| {
                (0..total)
                    .map(|idx| {
                        let mut x = bx.lo;
                        let mut rem = idx;
                        for &a in &axes {
                            let i = rem % n;
                            rem /= n;
                            x[a] = bx.lo[a] + (bx.hi[a] - bx.lo[a]) * T::of_usize(i) / T::of_usize(n - 1);
                        }
                        f.grad(&x)
                    })
                    .collect()
            })
            .collect();
        let mut best: Option<(usize, Vec<i8>, T)> = None;
        'axis: for &k in &order {
            let mut signs = Vec::with_capacity(funcs.len());
            let mut slope = T::infinity();
            for g in &grads {
                let pos = g.iter().all(|v| v[k] > T::zero());
                let neg = g.iter().all(|v| v[k] < T::zero());
                if !(pos || neg) {
                    continue 'axis;
                }
                signs.push(if pos { 1 } else { -1 });
                for v in g {
                    let gn = axes.iter().fold(T::zero(), |s, &a| s + v[a] * v[a]).sqrt();
                    slope = slope.min(v[k].abs() / gn);
                }
            }
            if best.as_ref().map_or(true, |b| slope > b.2) {
                best = Some((k, signs, slope));
            }
        }
        let (k, signs, slope) = best?;
        if slope < T::of(MIN_SLOPE) && !accept_steep {
            return None;
        }
        Some((k, signs))
    }

    fn children(bx: &AxisBox<T>) -> Vec<AxisBox<T>> {
        let axes = bx.free_axes();
        let c = bx.center();
        (0..1usize << axes.len())
            .map(|bits| {
                let mut child = *bx;
                for (j, &a) in axes.iter().enumerate() {
                    if bits >> j & 1 == 0 {
                        child.hi[a] = c[a];
                    } else {
                        child.lo[a] = c[a];
                    }
                }
                child
            })
            .collect()
    }

    fn volume(
        &self,
        funcs: &[Psi<'_, T>],
        conds: &[Cond],
        bx: &AxisBox<T>,
        depth: usize,
        emit: &mut Emit<'_, T>,
    ) -> Result<()> {
        let axes = bx.free_axes();
        if axes.is_empty() {
            if funcs.iter().zip(conds).all(|(f, c)| c.holds(f.eval(&bx.lo))) {
                emit(bx.lo, T::one());
            }
            return Ok(());
        }
        let c = bx.center();
        let r = bx.half_diagonal();
        let mut kept = Vec::new();
        let mut kept_conds = Vec::new();
        for (f, &cond) in funcs.iter().zip(conds) {
            let v = f.eval(&c);
            if v.abs() > r * f.ls.lipschitz() {
                if !cond.holds(v) {
                    return Ok(());
                }
            } else {
                kept.push(*f);
                kept_conds.push(cond);
            }
        }
        if kept.is_empty() {
            self.tensor(bx, emit);
            return Ok(());
        }
        if axes.len() == 1 {
            let a = axes[0];
            return self.line(&kept, &kept_conds, bx.lo, a, bx.lo[a], bx.hi[a], T::one(), emit);
        }
        let Some((k, sigma)) = self.height_axis(&kept, bx, depth >= self.max_subdiv) else {
            if depth < self.max_subdiv {
                for child in Self::children(bx) {
                    self.volume(&kept, &kept_conds, &child, depth + 1, emit)?;
                }
            } else {
                self.low_order.set(true);
                self.tensor(bx, &mut |x, w| {
                    if kept.iter().zip(&kept_conds).all(|(f, c)| c.holds(f.eval(&x))) {
                        emit(x, w);
                    }
                });
            }
            return Ok(());
        };
        let mut base_funcs = Vec::with_capacity(2 * kept.len());
        let mut base_conds = Vec::with_capacity(2 * kept.len());
        for ((f, &cond), &s) in kept.iter().zip(&kept_conds).zip(&sigma) {
            let (cl, cu) = match cond.sign() * s {
                0 => (Cond::Any, Cond::Any),
                x if x < 0 => (cond, Cond::Any),
                _ => (Cond::Any, cond),
            };
            base_funcs.push(f.fix(k, bx.lo[k]));
            base_conds.push(cl);
            base_funcs.push(f.fix(k, bx.hi[k]));
            base_conds.push(cu);
        }
        let mut base = *bx;
        base.hi[k] = base.lo[k];
        let mut err = None;
        self.volume(&base_funcs, &base_conds, &base, depth, &mut |x, w| {
            if err.is_none() {
                if let Err(e) = self.line(&kept, &kept_conds, x, k, bx.lo[k], bx.hi[k], w, emit) {
                    err = Some(e);
                }
            }
        })?;
        err.map_or(Ok(()), Err)
    }

    /// Points on `{f = 0}` inside the box with surface weights.
    fn surface(
        &self,
        f: Psi<'_, T>,
        bx: &AxisBox<T>,
        depth: usize,
        emit: &mut dyn FnMut([T; 3], T),
    ) -> Result<()> {
        let axes = bx.free_axes();
        if axes.is_empty() || f.eval(&bx.center()).abs() > bx.half_diagonal() * f.ls.lipschitz() {
            return Ok(());
        }
        let (k, base_conds) = match self.height_axis(&[f], bx, depth >= self.max_subdiv || axes.len() == 1) {
            Some((k, s)) => (k, [Cond::with_sign(-s[0]), Cond::with_sign(s[0])]),
            None if depth < self.max_subdiv && axes.len() > 1 => {
                for child in Self::children(bx) {
                    self.surface(f, &child, depth + 1, emit)?;
                }
                return Ok(());
            }
            None => {
                self.low_order.set(true);
                let c = bx.center();
                let g = f.grad(&c);
                let k = *axes
                    .iter()
                    .max_by(|&&a, &&b| g[a].abs().partial_cmp(&g[b].abs()).unwrap().then(b.cmp(&a)))
                    .unwrap();
                (k, [Cond::Any, Cond::Any])
            }
        };
        let (lo, hi) = (bx.lo[k], bx.hi[k]);
        let mut err = None;
        let mut on_base = |x: [T; 3], w: T| {
            if err.is_some() {
                return;
            }
            let mut roots = Vec::new();
            let g = |t: T| {
                let mut p = x;
                p[k] = t;
                f.eval(&p)
            };
            let dg = |t: T| {
                let mut p = x;
                p[k] = t;
                f.grad(&p)[k]
            };
            if let Err(e) = find_roots(&g, &dg, lo, hi, &mut roots) {
                err = Some(e);
                return;
            }
            if roots.len() > MAX_ROOTS_PER_LINE {
                self.low_order.set(true);
            }
            for t in roots {
                let mut p = x;
                p[k] = t;
                let grad = f.grad(&p);
                let gk = grad[k].abs();
                if gk > T::zero() {
                    emit(p, w * norm(&grad, 3) / gk);
                }
            }
        };
        let mut base = *bx;
        base.hi[k] = base.lo[k];
        if base.free_axes().is_empty() {
            on_base(base.lo, T::one());
        } else {
            let funcs = [f.fix(k, lo), f.fix(k, hi)];
            self.volume(&funcs, &base_conds, &base, depth, &mut on_base)?;
        }
        err.map_or(Ok(()), Err)
    }
}

/// Volume and surface rule of one cut cell. Points are reference
/// coordinates in `[0,1]^d`; weights carry the physical measure.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CutCellRule<T> {
    pub volume_points: Vec<[T; 3]>,
    pub volume_jxw: Vec<T>,
    pub surface_points: Vec<[T; 3]>,
    pub surface_jxw: Vec<T>,
    pub surface_normals: Vec<[T; 3]>,
    /// Set when some part fell back to the low-order indicator rule.
    pub low_order: bool,
}

/// Rule on the physical part of a cut face. Points are in-face reference
/// coordinates (the tangential axes in increasing order, unused slots 0).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CutFaceRule<T> {
    pub points: Vec<[T; 3]>,
    pub jxw: Vec<T>,
    pub low_order: bool,
}

fn to_reference<T: Real>(x: &[T; 3], bx: &AxisBox<T>) -> [T; 3] {
    let mut r = [T::zero(); 3];
    for a in 0..bx.dim {
        let len = bx.hi[a] - bx.lo[a];
        if len > T::zero() {
            r[a] = ((x[a] - bx.lo[a]) / len).max(T::zero()).min(T::one());
        }
    }
    r
}

fn check_intersected<T: Real>(ls: &LevelSet<T>, bx: &AxisBox<T>) -> Result<()> {
    let v = ls.eval(&bx.center());
    if v.abs() > bx.half_diagonal() * ls.lipschitz() {
        return Err(Error::NotIntersected(format!(
            "box {:?}..{:?} has uniform level-set sign",
            bx.lo.map(|x| x.as_f64()),
            bx.hi.map(|x| x.as_f64())
        )));
    }
    Ok(())
}

/// Volume rule for `cell ∩ {phi < 0}` (or `phi > 0` for [`Side::Outside`]).
/// Returns physical points, weights, and the low-order flag.
pub fn cut_volume_points<T: Real>(
    ls: &LevelSet<T>,
    cell: &AxisBox<T>,
    n_q: usize,
    max_subdiv: usize,
    side: Side,
) -> Result<(Vec<[T; 3]>, Vec<T>, bool)> {
    check_intersected(ls, cell)?;
    let local = ls.localize(&cell.center(), cell.half_diagonal());
    let ctx = Ctx::new(n_q, max_subdiv)?;
    let f = Psi { ls: &local, fixed: [None; 3] };
    let cond = match side {
        Side::Inside => Cond::Neg,
        Side::Outside => Cond::Pos,
    };
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    ctx.volume(&[f], &[cond], cell, 0, &mut |x, w| {
        pts.push(x);
        wts.push(w);
    })?;
    Ok((pts, wts, ctx.low_order.get()))
}

/// Surface rule for `cell ∩ {phi = 0}`: physical points, weights, unit
/// normals `grad phi / |grad phi|`, and the low-order flag.
#[allow(clippy::type_complexity)]
pub fn cut_surface_points<T: Real>(
    ls: &LevelSet<T>,
    cell: &AxisBox<T>,
    n_q: usize,
    max_subdiv: usize,
) -> Result<(Vec<[T; 3]>, Vec<T>, Vec<[T; 3]>, bool)> {
    check_intersected(ls, cell)?;
    let local = ls.localize(&cell.center(), cell.half_diagonal());
    let ctx = Ctx::new(n_q, max_subdiv)?;
    let f = Psi { ls: &local, fixed: [None; 3] };
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    ctx.surface(f, cell, 0, &mut |x, w| {
        pts.push(x);
        wts.push(w);
    })?;
    let mut normals = Vec::with_capacity(pts.len());
    for x in &pts {
        let g = local.gradient(x)?;
        let n = norm(&g, 3);
        normals.push(g.map(|v| v / n));
    }
    Ok((pts, wts, normals, ctx.low_order.get()))
}

pub fn cut_cell_rule<T: Real>(
    ls: &LevelSet<T>,
    cell: &AxisBox<T>,
    n_q: usize,
    max_subdiv: usize,
) -> Result<CutCellRule<T>> {
    let (vp, vw, lo_v) = cut_volume_points(ls, cell, n_q, max_subdiv, Side::Inside)?;
    let (sp, sw, sn, lo_s) = cut_surface_points(ls, cell, n_q, max_subdiv)?;
    Ok(CutCellRule {
        volume_points: vp.iter().map(|x| to_reference(x, cell)).collect(),
        volume_jxw: vw,
        surface_points: sp.iter().map(|x| to_reference(x, cell)).collect(),
        surface_jxw: sw,
        surface_normals: sn,
        low_order: lo_v || lo_s,
    })
}

/// Rule for `face ∩ {phi < 0}`; `face` is a box with one degenerate axis.
pub fn cut_face_rule<T: Real>(
    ls: &LevelSet<T>,
    face: &AxisBox<T>,
    n_q: usize,
    max_subdiv: usize,
) -> Result<CutFaceRule<T>> {
    let (pts, jxw, low_order) = cut_volume_points(ls, face, n_q, max_subdiv, Side::Inside)?;
    let axes = face.free_axes();
    let points = pts
        .iter()
        .map(|x| {
            let r = to_reference(x, face);
            let mut t = [T::zero(); 3];
            for (j, &a) in axes.iter().enumerate() {
                t[j] = r[a];
            }
            t
        })
        .collect();
    Ok(CutFaceRule { points, jxw, low_order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize) -> AxisBox<f64> {
        AxisBox::unit(dim)
    }

    fn sum(v: &[f64]) -> f64 {
        v.iter().sum()
    }

    #[test]
    fn plane_half_cell() {
        let ls = LevelSet::plane([1.0, 0.0, 0.0], 0.5).unwrap();
        let r = cut_cell_rule(&ls, &unit(3), 3, DEFAULT_MAX_SUBDIV).unwrap();
        assert!((sum(&r.volume_jxw) - 0.5).abs() < 1e-14);
        assert!((sum(&r.surface_jxw) - 1.0).abs() < 1e-14);
        for n in &r.surface_normals {
            assert!((n[0] - 1.0).abs() < 1e-15 && n[1].abs() < 1e-15);
        }
        assert!(r.volume_points.iter().all(|p| p[0] < 0.5));
        assert!(!r.low_order);
    }

    #[test]
    fn tilted_line_in_unit_square() {
        let s = 0.5f64.sqrt();
        // x + y = 1 crosses the square along its diagonal
        let ls = LevelSet::plane([s, s, 0.0], s).unwrap();
        let r = cut_cell_rule(&ls, &unit(2), 3, DEFAULT_MAX_SUBDIV).unwrap();
        assert!((sum(&r.surface_jxw) - 2f64.sqrt()).abs() < 1e-12);
        assert!((sum(&r.volume_jxw) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn untouched_cell_rejected() {
        let ls = LevelSet::sphere([5.0; 3], 0.1).unwrap();
        assert!(matches!(
            cut_cell_rule(&ls, &unit(3), 3, DEFAULT_MAX_SUBDIV),
            Err(Error::NotIntersected(_))
        ));
        let inside = LevelSet::sphere([0.5; 3], 10.0).unwrap();
        let face = AxisBox::new([0.0; 3], [1.0, 1.0, 0.0], 3);
        assert!(matches!(cut_face_rule(&inside, &face, 3, 4), Err(Error::NotIntersected(_))));
    }

    #[test]
    fn complement_sums_to_cell() {
        let ls = LevelSet::sphere([0.3, 0.2, 0.9], 0.55).unwrap();
        let cell = AxisBox::new([0.0; 3], [0.5, 0.5, 0.5], 3);
        let (_, win, _) = cut_volume_points(&ls, &cell, 4, 4, Side::Inside).unwrap();
        let (_, wout, _) = cut_volume_points(&ls, &cell, 4, 4, Side::Outside).unwrap();
        assert!((sum(&win) + sum(&wout) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn face_cut_by_plane() {
        let ls = LevelSet::plane([1.0, 0.0, 0.0], 0.5).unwrap();
        let face = AxisBox::new([0.0; 3], [1.0, 1.0, 0.0], 3);
        let r = cut_face_rule(&ls, &face, 3, 4).unwrap();
        assert!((sum(&r.jxw) - 0.5).abs() < 1e-14);
        assert!(r.points.iter().all(|p| p[0] < 0.5 && p[2] == 0.0));
    }

    #[test]
    fn disk_on_face() {
        // sphere of radius 0.4 centered on the face z = 0 of the unit cube
        let ls = LevelSet::sphere([0.5, 0.5, 0.0], 0.4).unwrap();
        let face = AxisBox::new([0.0; 3], [1.0, 1.0, 0.0], 3);
        let r = cut_face_rule(&ls, &face, 4, 4).unwrap();
        let area = std::f64::consts::PI * 0.16;
        assert!((sum(&r.jxw) - area).abs() < 1e-6, "{}", sum(&r.jxw) - area);
    }

    #[test]
    fn sphere_surface_points_lie_on_interface() {
        let ls = LevelSet::<f64>::sphere([0.1, -0.2, 0.05], 0.7).unwrap();
        let cell = AxisBox::new([0.2, 0.1, 0.0], [0.6, 0.5, 0.4], 3);
        let (pts, w, normals, _) = cut_surface_points(&ls, &cell, 3, 4).unwrap();
        assert!(!pts.is_empty());
        for ((x, &wq), n) in pts.iter().zip(&w).zip(&normals) {
            assert!(ls.eval(x).abs() < 1e-10 * 0.4);
            assert!(wq > 0.0);
            assert!((norm(n, 3) - 1.0).abs() < 1e-10);
        }
    }

    /// Integral of `x^a y^b` over `{x + y < 1.3} ∩ [0,1]^2`, split at
    /// `y = 0.3` where the line enters the square.
    fn triangle_moment(a: i32, b: i32) -> f64 {
        let g = gauss_rule::<f64>(12).unwrap();
        let mut s = 0.0;
        // y in [0, 0.3]: x in [0, 1]
        for (&ty, &wy) in g.points.iter().zip(&g.weights) {
            let y = 0.3 * ty;
            s += 0.3 * wy * y.powi(b) / (a as f64 + 1.0);
        }
        // y in [0.3, 1]: x in [0, 1.3 - y]
        for (&ty, &wy) in g.points.iter().zip(&g.weights) {
            let y = 0.3 + 0.7 * ty;
            s += 0.7 * wy * y.powi(b) * (1.3 - y).powi(a + 1) / (a as f64 + 1.0);
        }
        s
    }

    #[test]
    fn affine_moments_exact_2d() {
        let s = 0.5f64.sqrt();
        let ls = LevelSet::plane([s, s, 0.0], 1.3 * s).unwrap();
        let n_q = 3;
        let (pts, w, _) = cut_volume_points(&ls, &unit(2), n_q, 4, Side::Inside).unwrap();
        // the height integral of x^a y^b is a polynomial of degree a + b + 1
        // in the base coordinate
        for a in 0..2 * n_q as i32 - 1 {
            for b in 0..2 * n_q as i32 - 1 - a {
                let got: f64 = pts.iter().zip(&w).map(|(p, &wq)| wq * p[0].powi(a) * p[1].powi(b)).sum();
                assert!((got - triangle_moment(a, b)).abs() < 1e-10, "a={a} b={b}");
            }
        }
    }

    /// Integral of `x^a y^b z^c` over `{x + y + z < 1.5} ∩ [0,1]^3` by nested
    /// piecewise Gauss integration with breakpoints where the plane meets
    /// the cube edges.
    fn tetra_cut_moment(a: i32, b: i32, c: i32) -> f64 {
        let g = gauss_rule::<f64>(16).unwrap();
        let seg = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
            g.points.iter().zip(&g.weights).map(|(&t, &w)| (hi - lo) * w * f(lo + (hi - lo) * t)).sum()
        };
        let inner_x = |y: f64, z: f64| -> f64 {
            let top = (1.5 - y - z).clamp(0.0, 1.0);
            top.powi(a + 1) / (a as f64 + 1.0)
        };
        let over_y = |z: f64| -> f64 {
            // breaks where 1.5 - y - z hits 0 or 1
            let mut br = vec![0.0, 1.0, 0.5 - z, 1.5 - z];
            br.retain(|&v| (0.0..=1.0).contains(&v));
            br.sort_by(|p, q| p.partial_cmp(q).unwrap());
            br.windows(2).map(|w| seg(w[0], w[1], &|y| y.powi(b) * inner_x(y, z))).sum()
        };
        seg(0.0, 0.5, &|z| z.powi(c) * over_y(z)) + seg(0.5, 1.0, &|z| z.powi(c) * over_y(z))
    }

    #[test]
    fn affine_moments_exact_3d() {
        let s = 1.0 / 3f64.sqrt();
        let ls = LevelSet::plane([s, s, s], 1.5 * s).unwrap();
        let n_q = 2;
        let (pts, w, _) = cut_volume_points(&ls, &unit(3), n_q, 4, Side::Inside).unwrap();
        for a in 0..3 {
            for b in 0..3 - a {
                for c in 0..3 - a - b {
                    let got: f64 = pts
                        .iter()
                        .zip(&w)
                        .map(|(p, &wq)| wq * p[0].powi(a) * p[1].powi(b) * p[2].powi(c))
                        .sum();
                    let exact = tetra_cut_moment(a, b, c);
                    assert!((got - exact).abs() < 1e-10, "a={a} b={b} c={c}: {got} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn ball_inside_cell_converges() {
        let ls = LevelSet::sphere([0.5, 0.52, 0.47], 0.3).unwrap();
        let pi = std::f64::consts::PI;
        let (_, w, _) = cut_volume_points(&ls, &unit(3), 6, 4, Side::Inside).unwrap();
        let (_, sw, _, _) = cut_surface_points(&ls, &unit(3), 6, 4).unwrap();
        assert!((sum(&w) - 0.036 * pi).abs() < 1e-8);
        assert!((sum(&sw) - 0.36 * pi).abs() < 1e-6);
        let disk = LevelSet::sphere([0.5, 0.52, 0.0], 0.3).unwrap();
        let (_, sw, _, low) = cut_surface_points(&disk, &unit(2), 6, 4).unwrap();
        assert!((sum(&sw) - 0.6 * pi).abs() < 1e-6);
        assert!(!low);
    }

    #[test]
    fn two_sphere_union_cell_subdivides_or_resolves() {
        let ls = LevelSet::union(vec![
            LevelSet::sphere([0.0, 0.5, 0.5], 0.45).unwrap(),
            LevelSet::sphere([1.0, 0.5, 0.5], 0.45).unwrap(),
        ])
        .unwrap();
        let (_, win, _) = cut_volume_points(&ls, &unit(3), 4, 6, Side::Inside).unwrap();
        let (_, wout, _) = cut_volume_points(&ls, &unit(3), 4, 6, Side::Outside).unwrap();
        // two half balls inside the cube
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.45f64.powi(3);
        let got = win.iter().sum::<f64>();
        assert!((got - exact).abs() < 1e-6, "{got} vs {exact}");
        assert!((win.iter().sum::<f64>() + wout.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
