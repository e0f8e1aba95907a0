//! Level-set geometry: signed distance functions, unions, and the
//! classification of mesh entities against the zero isocontour.
//!
//! The physical domain is `{x : phi(x) < 0}`; the outward normal on the
//! interface is `grad(phi) / |grad(phi)|`. Points are always stored as
//! `[T; 3]`; two-dimensional problems keep the third coordinate at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{norm, Real};

/// Members whose values differ by less than this are treated as tied when
/// picking the active branch of a union.
const UNION_TIE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum LevelSet<T> {
    Sphere { center: [T; 3], radius: T },
    Plane { normal: [T; 3], offset: T },
    Union(Vec<LevelSet<T>>),
}

impl<T: Real> LevelSet<T> {
    pub fn sphere(center: [T; 3], radius: T) -> Result<Self> {
        if !(radius > T::zero()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(LevelSet::Sphere { center, radius })
    }

    pub fn plane(normal: [T; 3], offset: T) -> Result<Self> {
        let n = norm(&normal, 3);
        if (n - T::one()).abs() > T::of(1e-12) {
            return Err(Error::InvalidGeometry(format!(
                "plane normal must have unit length, got {n}"
            )));
        }
        Ok(LevelSet::Plane { normal, offset })
    }

    pub fn union(members: Vec<LevelSet<T>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidGeometry("union needs at least one member".into()));
        }
        Ok(LevelSet::Union(members))
    }

    /// Signed distance value (exact for spheres and planes, min over union members).
    pub fn eval(&self, x: &[T; 3]) -> T {
        match self {
            LevelSet::Sphere { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                norm(&d, 3) - *radius
            }
            LevelSet::Plane { normal, offset } => {
                normal[0] * x[0] + normal[1] * x[1] + normal[2] * x[2] - *offset
            }
            LevelSet::Union(members) => members
                .iter()
                .map(|m| m.eval(x))
                .fold(T::infinity(), |a, b| if b < a { b } else { a }),
        }
    }

    /// Gradient of the active branch. Fails where the gradient degenerates
    /// (sphere center).
    pub fn gradient(&self, x: &[T; 3]) -> Result<[T; 3]> {
        let g = self.raw_gradient(x);
        if norm(&g, 3) < T::of(1e-10) {
            return Err(Error::DegenerateGradient(
                x[0].as_f64(),
                x[1].as_f64(),
                x[2].as_f64(),
            ));
        }
        Ok(g)
    }

    /// Gradient without the degeneracy check; zero at a sphere center.
    pub fn raw_gradient(&self, x: &[T; 3]) -> [T; 3] {
        match self {
            LevelSet::Sphere { center, .. } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let r = norm(&d, 3);
                if r == T::zero() {
                    [T::zero(); 3]
                } else {
                    [d[0] / r, d[1] / r, d[2] / r]
                }
            }
            LevelSet::Plane { normal, .. } => *normal,
            LevelSet::Union(members) => members[self.active_member(x)].raw_gradient(x),
        }
    }

    /// Index of the union member attaining the minimum, lowest index on ties.
    /// Always 0 for non-union variants.
    pub fn active_member(&self, x: &[T; 3]) -> usize {
        match self {
            LevelSet::Union(members) => {
                let values: Vec<T> = members.iter().map(|m| m.eval(x)).collect();
                let min = values.iter().fold(T::infinity(), |a, &b| if b < a { b } else { a });
                values
                    .iter()
                    .position(|&v| (v - min).abs() < T::of(UNION_TIE))
                    .unwrap_or(0)
            }
            _ => 0,
        }
    }

    /// Upper bound on `|grad phi|`. Every variant is a signed distance
    /// function or a minimum of them.
    pub fn lipschitz(&self) -> T {
        T::one()
    }

    /// Restricts a union to the members that can attain the minimum inside
    /// the ball `|x - center| <= radius`. The result agrees with `self`
    /// exactly on that ball.
    pub fn localize(&self, center: &[T; 3], radius: T) -> LevelSet<T> {
        match self {
            LevelSet::Union(members) if members.len() > 1 => {
                let values: Vec<T> = members.iter().map(|m| m.eval(center)).collect();
                let best_upper = values
                    .iter()
                    .fold(T::infinity(), |a, &v| if v + radius < a { v + radius } else { a });
                let kept: Vec<LevelSet<T>> = members
                    .iter()
                    .zip(&values)
                    .filter(|(_, &v)| v - radius <= best_upper)
                    .map(|(m, _)| m.clone())
                    .collect();
                if kept.len() == 1 {
                    kept.into_iter().next().unwrap()
                } else {
                    LevelSet::Union(kept)
                }
            }
            _ => self.clone(),
        }
    }

    pub fn member_count(&self) -> usize {
        match self {
            LevelSet::Union(m) => m.iter().map(|x| x.member_count()).sum(),
            _ => 1,
        }
    }
}

/// `n^3` equal spheres on a regular lattice filling `[lo, hi]^3`.
pub fn sphere_grid<T: Real>(n: usize, lo: f64, hi: f64) -> Result<LevelSet<T>> {
    if n == 0 {
        return Err(Error::InvalidGeometry("sphere grid needs n >= 1".into()));
    }
    let spacing = (hi - lo) / n as f64;
    let radius = 0.35 * spacing;
    let mut members = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let c = [i, j, k].map(|a| T::of(lo + (a as f64 + 0.5) * spacing));
                members.push(LevelSet::sphere(c, T::of(radius))?);
            }
        }
    }
    LevelSet::union(members)
}

/// `n` intersecting spheres with centers uniform in `[lo, hi]^3` and radii
/// uniform in `[r_min, r_max]`; fully determined by `seed`.
pub fn sphere_random<T: Real>(
    n: usize,
    seed: u64,
    lo: f64,
    hi: f64,
    r_min: f64,
    r_max: f64,
) -> Result<LevelSet<T>> {
    if n == 0 || !(r_min > 0.0 && r_max >= r_min) {
        return Err(Error::InvalidGeometry("sphere_random needs n >= 1 and 0 < r_min <= r_max".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = (0..n)
        .map(|_| {
            let c = [0; 3].map(|_| T::of(rng.gen_range(lo..=hi)));
            LevelSet::sphere(c, T::of(rng.gen_range(r_min..=r_max)))
        })
        .collect::<Result<Vec<_>>>()?;
    LevelSet::union(members)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellCategory {
    Inside,
    Intersected,
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FaceCategory {
    Inside,
    Cut,
    Outside,
}

/// Axis-aligned box in up to three dimensions. Axes with `lo == hi` are
/// degenerate (a face) and axes `>= dim` are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisBox<T> {
    pub lo: [T; 3],
    pub hi: [T; 3],
    pub dim: usize,
}

impl<T: Real> AxisBox<T> {
    pub fn new(lo: [T; 3], hi: [T; 3], dim: usize) -> Self {
        Self { lo, hi, dim }
    }

    pub fn unit(dim: usize) -> Self {
        let mut hi = [T::zero(); 3];
        for h in hi.iter_mut().take(dim) {
            *h = T::one();
        }
        Self { lo: [T::zero(); 3], hi, dim }
    }

    /// Axes with positive extent.
    pub fn free_axes(&self) -> Vec<usize> {
        (0..self.dim).filter(|&a| self.hi[a] > self.lo[a]).collect()
    }

    pub fn max_edge(&self) -> T {
        (0..self.dim).fold(T::zero(), |m, a| m.max(self.hi[a] - self.lo[a]))
    }

    pub fn center(&self) -> [T; 3] {
        let two = T::of(2.0);
        [0, 1, 2].map(|a| (self.lo[a] + self.hi[a]) / two)
    }

    pub fn half_diagonal(&self) -> T {
        let d = [0, 1, 2].map(|a| if a < self.dim { self.hi[a] - self.lo[a] } else { T::zero() });
        norm(&d, 3) / T::of(2.0)
    }

    /// Lebesgue measure over the free axes.
    pub fn measure(&self) -> T {
        self.free_axes()
            .iter()
            .fold(T::one(), |m, &a| m * (self.hi[a] - self.lo[a]))
    }
}

/// Sign pattern of `phi` on the equispaced tensor grid with `samples`
/// points per free axis (vertices included). Returns (all below -eps,
/// all above +eps).
fn sign_pattern<T: Real>(ls: &LevelSet<T>, b: &AxisBox<T>, samples: usize) -> (bool, bool) {
    let eps = T::of(1e-12) * b.max_edge();
    // a 1-Lipschitz function cannot change sign within this distance
    let vc = ls.eval(&b.center());
    if vc.abs() > b.half_diagonal() + eps {
        return (vc < T::zero(), vc > T::zero());
    }
    let axes = b.free_axes();
    let samples = samples.max(2);
    let total = samples.pow(axes.len() as u32);
    let mut all_neg = true;
    let mut all_pos = true;
    let denom = T::of_usize(samples - 1);
    for idx in 0..total {
        let mut x = b.lo;
        let mut rem = idx;
        for &a in &axes {
            let i = rem % samples;
            rem /= samples;
            x[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * T::of_usize(i) / denom;
        }
        let v = ls.eval(&x);
        all_neg &= v < -eps;
        all_pos &= v > eps;
        if !all_neg && !all_pos {
            break;
        }
    }
    (all_neg, all_pos)
}

/// Classifies a cell by sampling `phi` on `samples^dim` equispaced points.
/// Callers use `samples = p + 2`.
pub fn classify_cell<T: Real>(ls: &LevelSet<T>, cell: &AxisBox<T>, samples: usize) -> CellCategory {
    match sign_pattern(ls, cell, samples) {
        (true, _) => CellCategory::Inside,
        (_, true) => CellCategory::Outside,
        _ => CellCategory::Intersected,
    }
}

/// Face analogue of [`classify_cell`]; `face` has one degenerate axis.
pub fn classify_face<T: Real>(ls: &LevelSet<T>, face: &AxisBox<T>, samples: usize) -> FaceCategory {
    match sign_pattern(ls, face, samples) {
        (true, _) => FaceCategory::Inside,
        (_, true) => FaceCategory::Outside,
        _ => FaceCategory::Cut,
    }
}

/// Radially symmetric manufactured solution of `-Δu = f` in a ball of
/// radius `radius` with `u = 0` on its boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution<T> {
    pub omega: T,
    pub radius: T,
    pub dim: usize,
}

impl<T: Real> ManufacturedSolution<T> {
    pub fn new(omega: T, radius: T, dim: usize) -> Self {
        Self { omega, radius, dim }
    }

    /// Default wavenumber `pi` on the unit ball.
    pub fn unit_ball(dim: usize) -> Self {
        Self::new(T::PI(), T::one(), dim)
    }

    fn r(&self, x: &[T; 3]) -> T {
        norm(x, self.dim)
    }

    pub fn u(&self, x: &[T; 3]) -> T {
        (self.omega * self.radius).cos() - (self.omega * self.r(x)).cos()
    }

    pub fn f(&self, x: &[T; 3]) -> T {
        let wr = self.omega * self.r(x);
        let sinc = if wr == T::zero() { T::one() } else { wr.sin() / wr };
        -self.omega * self.omega * (wr.cos() + T::of_usize(self.dim - 1) * sinc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sphere() -> LevelSet<f64> {
        LevelSet::sphere([0.0; 3], 1.0).unwrap()
    }

    fn two_spheres() -> LevelSet<f64> {
        LevelSet::union(vec![
            unit_sphere(),
            LevelSet::sphere([3.0, 0.0, 0.0], 1.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(unit_sphere().eval(&[2.0, 0.0, 0.0]), 1.0);
        let plane = LevelSet::plane([1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(plane.eval(&[0.5, 0.3, -7.0]), 0.0);
        assert_eq!(two_spheres().eval(&[3.0, 0.0, 0.0]), -1.0);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(unit_sphere().gradient(&[2.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        let n = [0.6, 0.8, 0.0];
        let plane = LevelSet::plane(n, 0.1).unwrap();
        assert_eq!(plane.gradient(&[5.0, -2.0, 1.0]).unwrap(), n);
        assert_eq!(two_spheres().gradient(&[2.9, 0.0, 0.0]).unwrap(), [-1.0, 0.0, 0.0]);
        assert!(matches!(
            unit_sphere().gradient(&[0.0; 3]),
            Err(Error::DegenerateGradient(..))
        ));
    }

    #[test]
    fn union_tie_picks_lowest_index() {
        // x = 1.5 is equidistant from both spheres
        let g = two_spheres().gradient(&[1.5, 0.0, 0.0]).unwrap();
        assert_eq!(g, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(LevelSet::<f64>::sphere([0.0; 3], 0.0).is_err());
        assert!(LevelSet::<f64>::plane([1.0, 1.0, 0.0], 0.0).is_err());
        assert!(LevelSet::<f64>::union(vec![]).is_err());
    }

    #[test]
    fn cell_classification_examples() {
        let unit = AxisBox::<f64>::unit(3);
        let plane = LevelSet::plane([1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(classify_cell(&plane, &unit, 3), CellCategory::Intersected);
        let big = LevelSet::sphere([0.0; 3], 10.0).unwrap();
        assert_eq!(classify_cell(&big, &unit, 3), CellCategory::Inside);
        let far = LevelSet::sphere([5.0; 3], 0.1).unwrap();
        assert_eq!(classify_cell(&far, &unit, 3), CellCategory::Outside);
    }

    #[test]
    fn face_classification_examples() {
        let plane = LevelSet::plane([1.0, 0.0, 0.0], 0.5).unwrap();
        let x1 = AxisBox::new([1.0, 0.0, 0.0], [1.0, 1.0, 1.0], 3);
        assert_eq!(classify_face(&plane, &x1, 3), FaceCategory::Outside);
        let z0 = AxisBox::new([0.0, 0.0, 0.0], [1.0, 1.0, 0.0], 3);
        assert_eq!(classify_face(&plane, &z0, 3), FaceCategory::Cut);
        let big = LevelSet::sphere([0.0; 3], 10.0).unwrap();
        assert_eq!(classify_face(&big, &z0, 3), FaceCategory::Inside);
    }

    #[test]
    fn localize_preserves_values_in_ball() {
        let ls = sphere_grid::<f64>(4, -1.0, 1.0).unwrap();
        let c = [0.1, -0.3, 0.45];
        let r = 0.2;
        let local = ls.localize(&c, r);
        assert!(local.member_count() < ls.member_count());
        for i in 0..50 {
            let t = i as f64 / 49.0;
            let x = [c[0] + r * 0.5 * (t * 7.0).sin(), c[1] + r * 0.5 * (t * 3.0).cos(), c[2] - r * 0.4 * t];
            assert_eq!(local.eval(&x), ls.eval(&x));
        }
    }

    #[test]
    fn random_spheres_are_seeded() {
        let a = sphere_random::<f64>(10, 7, -0.7, 0.7, 0.2, 0.4).unwrap();
        let b = sphere_random::<f64>(10, 7, -0.7, 0.7, 0.2, 0.4).unwrap();
        let c = sphere_random::<f64>(10, 8, -0.7, 0.7, 0.2, 0.4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn manufactured_solution_vanishes_on_boundary() {
        let m = ManufacturedSolution::<f64>::unit_ball(3);
        assert_eq!(m.u(&[1.0, 0.0, 0.0]), 0.0);
        assert!((m.u(&[0.0; 3]) + 2.0).abs() < 1e-15);
        // sinc(0) = 1: f(0) = -pi^2 (1 + 2)
        assert!((m.f(&[0.0; 3]) + 3.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn manufactured_laplacian_matches_rhs() {
        // second-order central differences: error ratio ~4 per halving
        let m = ManufacturedSolution::<f64>::unit_ball(3);
        let pts = [[0.3, -0.2, 0.5], [0.05, 0.6, -0.1], [-0.4, -0.4, 0.2]];
        for x in pts {
            let mut errs = Vec::new();
            for step in [1e-2, 5e-3, 2.5e-3] {
                let mut lap = 0.0;
                for a in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[a] += step;
                    xm[a] -= step;
                    lap += (m.u(&xp) - 2.0 * m.u(&x) + m.u(&xm)) / (step * step);
                }
                errs.push((-lap - m.f(&x)).abs());
            }
            assert!(errs[0] < 1e-2);
            let r1 = errs[0] / errs[1];
            let r2 = errs[1] / errs[2];
            assert!(r1 > 3.5 && r1 < 4.5, "ratio {r1}");
            assert!(r2 > 3.5 && r2 < 4.5, "ratio {r2}");
        }
    }

    #[test]
    fn two_dimensional_manufactured_solution() {
        let m = ManufacturedSolution::<f64>::unit_ball(2);
        let x = [0.3, 0.4, 0.0];
        let h = 1e-3;
        let mut lap = 0.0;
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            lap += (m.u(&xp) - 2.0 * m.u(&x) + m.u(&xm)) / (h * h);
        }
        assert!((-lap - m.f(&x)).abs() < 1e-4);
    }
}
