//! Evaluation at arbitrary points of one cell, `W` points at a time.
//!
//! The 1D basis is evaluated per axis for the whole point group and the
//! tensor contraction is staged axis by axis (x first), so one point costs
//! `2k^3 + 3k^2 + 4k` multiply-adds for value and gradient in 3D instead of
//! `4k^3`. Integration is the exact transpose and accumulates into lane
//! vectors that are summed horizontally once per cell.

use crate::kernels::counter;
use crate::kernels::shape::LagrangeBasis;
use crate::lanes::Lanes;
use crate::scalar::Real;

/// 1D basis values and derivatives at a group of points, per axis.
#[derive(Clone, Debug)]
pub struct PointBasis<V> {
    k: usize,
    vals: [Vec<V>; 3],
    ders: [Vec<V>; 3],
}

impl<V: Copy> PointBasis<V> {
    pub fn new<T: Real>(k: usize) -> Self
    where
        V: Lanes<T>,
    {
        let z = vec![V::zero(); k];
        Self { k, vals: [z.clone(), z.clone(), z.clone()], ders: [z.clone(), z.clone(), z] }
    }

    /// Tabulates the basis in the first `n_axes` coordinates of `pts`
    /// (at most `WIDTH` points). Missing lanes repeat the last point.
    pub fn fill<T: Real>(&mut self, basis: &LagrangeBasis<T>, n_axes: usize, pts: &[[T; 3]])
    where
        V: Lanes<T>,
    {
        debug_assert!(!pts.is_empty() && pts.len() <= V::WIDTH);
        let k = self.k;
        let mut v = [T::zero(); 8];
        let mut d = [T::zero(); 8];
        let mut flops = 0;
        for lane in 0..V::WIDTH {
            let x = &pts[lane.min(pts.len() - 1)];
            for a in 0..n_axes {
                flops += basis.eval(x[a], &mut v[..k], &mut d[..k]);
                for i in 0..k {
                    self.vals[a][i].set_lane(lane, v[i]);
                    self.ders[a][i].set_lane(lane, d[i]);
                }
            }
        }
        counter::overhead(flops);
    }
}

/// Work arrays for the staged contractions.
#[derive(Clone, Debug)]
pub struct PointScratch<V> {
    a: Vec<V>,
    b: Vec<V>,
    c: Vec<V>,
    d: Vec<V>,
    e: Vec<V>,
}

impl<V: Copy> PointScratch<V> {
    pub fn new<T: Real>(k: usize) -> Self
    where
        V: Lanes<T>,
    {
        let z = V::zero();
        Self { a: vec![z; k * k], b: vec![z; k * k], c: vec![z; k], d: vec![z; k], e: vec![z; k] }
    }
}

/// Value and reference gradient (first `nd` entries) of the polynomial with
/// DoF values `u` (`k^nd`, x fastest) at the tabulated points.
pub fn eval_point<T: Real, V: Lanes<T>>(
    nd: usize,
    u: &[T],
    b: &PointBasis<V>,
    s: &mut PointScratch<V>,
) -> (V, [V; 3]) {
    let k = b.k;
    let (s0, d0) = (&b.vals[0], &b.ders[0]);
    let mut g = [V::zero(); 3];
    match nd {
        1 => {
            let (mut v, mut dx) = (s0[0] * u[0], d0[0] * u[0]);
            for i in 1..k {
                v += s0[i] * u[i];
                dx += d0[i] * u[i];
            }
            counter::fma(2 * k * V::WIDTH);
            g[0] = dx;
            (v, g)
        }
        2 => {
            let (s1, d1) = (&b.vals[1], &b.ders[1]);
            for j in 0..k {
                let row = &u[j * k..(j + 1) * k];
                let (mut av, mut bv) = (s0[0] * row[0], d0[0] * row[0]);
                for i in 1..k {
                    av += s0[i] * row[i];
                    bv += d0[i] * row[i];
                }
                s.a[j] = av;
                s.b[j] = bv;
            }
            let (mut v, mut gy, mut gx) = (s1[0] * s.a[0], d1[0] * s.a[0], s1[0] * s.b[0]);
            for j in 1..k {
                v += s1[j] * s.a[j];
                gy += d1[j] * s.a[j];
                gx += s1[j] * s.b[j];
            }
            counter::fma((2 * k * k + 3 * k) * V::WIDTH);
            g[0] = gx;
            g[1] = gy;
            (v, g)
        }
        _ => {
            let (s1, d1) = (&b.vals[1], &b.ders[1]);
            let (s2, d2) = (&b.vals[2], &b.ders[2]);
            for jl in 0..k * k {
                let row = &u[jl * k..(jl + 1) * k];
                let (mut av, mut bv) = (s0[0] * row[0], d0[0] * row[0]);
                for i in 1..k {
                    av += s0[i] * row[i];
                    bv += d0[i] * row[i];
                }
                s.a[jl] = av;
                s.b[jl] = bv;
            }
            for l in 0..k {
                let a = &s.a[l * k..(l + 1) * k];
                let bb = &s.b[l * k..(l + 1) * k];
                let (mut c, mut d, mut e) = (s1[0] * a[0], d1[0] * a[0], s1[0] * bb[0]);
                for j in 1..k {
                    c += s1[j] * a[j];
                    d += d1[j] * a[j];
                    e += s1[j] * bb[j];
                }
                s.c[l] = c;
                s.d[l] = d;
                s.e[l] = e;
            }
            let (mut v, mut gz, mut gy, mut gx) = (s2[0] * s.c[0], d2[0] * s.c[0], s2[0] * s.d[0], s2[0] * s.e[0]);
            for l in 1..k {
                v += s2[l] * s.c[l];
                gz += d2[l] * s.c[l];
                gy += s2[l] * s.d[l];
                gx += s2[l] * s.e[l];
            }
            counter::fma((2 * k * k * k + 3 * k * k + 4 * k) * V::WIDTH);
            g = [gx, gy, gz];
            (v, g)
        }
    }
}

/// Value only: `k^nd + ... + k` multiply-adds per point.
pub fn eval_point_value<T: Real, V: Lanes<T>>(nd: usize, u: &[T], b: &PointBasis<V>, s: &mut PointScratch<V>) -> V {
    let k = b.k;
    let contract = |tab: &[V], src: &[T]| {
        let mut acc = tab[0] * src[0];
        for i in 1..k {
            acc += tab[i] * src[i];
        }
        acc
    };
    let contract_v = |tab: &[V], src: &[V]| {
        let mut acc = tab[0] * src[0];
        for i in 1..k {
            acc += tab[i] * src[i];
        }
        acc
    };
    let v = match nd {
        1 => contract(&b.vals[0], u),
        2 => {
            for j in 0..k {
                s.a[j] = contract(&b.vals[0], &u[j * k..(j + 1) * k]);
            }
            contract_v(&b.vals[1], &s.a[..k])
        }
        _ => {
            for jl in 0..k * k {
                s.a[jl] = contract(&b.vals[0], &u[jl * k..(jl + 1) * k]);
            }
            for l in 0..k {
                s.c[l] = contract_v(&b.vals[1], &s.a[l * k..(l + 1) * k]);
            }
            contract_v(&b.vals[2], &s.c[..k])
        }
    };
    let work: usize = (1..=nd).map(|e| k.pow(e as u32)).sum();
    counter::fma(work * V::WIDTH);
    v
}

/// Transpose of [`eval_point`]: adds `rv * phi + rg . grad phi` for every
/// basis function into the lane accumulators `acc` (`k^nd`).
pub fn integrate_point<T: Real, V: Lanes<T>>(
    nd: usize,
    rv: V,
    rg: [V; 3],
    b: &PointBasis<V>,
    acc: &mut [V],
    s: &mut PointScratch<V>,
) {
    let k = b.k;
    let (s0, d0) = (&b.vals[0], &b.ders[0]);
    match nd {
        1 => {
            for i in 0..k {
                acc[i] += s0[i] * rv + d0[i] * rg[0];
            }
            counter::fma(2 * k * V::WIDTH);
        }
        2 => {
            let (s1, d1) = (&b.vals[1], &b.ders[1]);
            for j in 0..k {
                s.a[j] = s1[j] * rv + d1[j] * rg[1];
                s.b[j] = s1[j] * rg[0];
            }
            for j in 0..k {
                let row = &mut acc[j * k..(j + 1) * k];
                for i in 0..k {
                    row[i] += s0[i] * s.a[j] + d0[i] * s.b[j];
                }
            }
            counter::fma((2 * k * k + 3 * k) * V::WIDTH);
        }
        _ => {
            let (s1, d1) = (&b.vals[1], &b.ders[1]);
            let (s2, d2) = (&b.vals[2], &b.ders[2]);
            for l in 0..k {
                s.c[l] = s2[l] * rv + d2[l] * rg[2];
                s.d[l] = s2[l] * rg[1];
                s.e[l] = s2[l] * rg[0];
            }
            for l in 0..k {
                for j in 0..k {
                    s.a[l * k + j] = s1[j] * s.c[l] + d1[j] * s.d[l];
                    s.b[l * k + j] = s1[j] * s.e[l];
                }
            }
            for jl in 0..k * k {
                let (a, bb) = (s.a[jl], s.b[jl]);
                let row = &mut acc[jl * k..(jl + 1) * k];
                for i in 0..k {
                    row[i] += s0[i] * a + d0[i] * bb;
                }
            }
            counter::fma((2 * k * k * k + 3 * k * k + 4 * k) * V::WIDTH);
        }
    }
}

/// Transpose of [`eval_point_value`].
pub fn integrate_point_value<T: Real, V: Lanes<T>>(
    nd: usize,
    rv: V,
    b: &PointBasis<V>,
    acc: &mut [V],
    s: &mut PointScratch<V>,
) {
    let k = b.k;
    let s0 = &b.vals[0];
    let spread = |tab: &[V], coef: V, dst: &mut [V]| {
        for i in 0..k {
            dst[i] += tab[i] * coef;
        }
    };
    match nd {
        1 => spread(s0, rv, acc),
        2 => {
            for j in 0..k {
                let c = b.vals[1][j] * rv;
                spread(s0, c, &mut acc[j * k..(j + 1) * k]);
            }
        }
        _ => {
            for l in 0..k {
                s.c[l] = b.vals[2][l] * rv;
            }
            for l in 0..k {
                for j in 0..k {
                    s.a[l * k + j] = b.vals[1][j] * s.c[l];
                }
            }
            for jl in 0..k * k {
                let c = s.a[jl];
                spread(s0, c, &mut acc[jl * k..(jl + 1) * k]);
            }
        }
    }
    let work: usize = (1..=nd).map(|e| k.pow(e as u32)).sum();
    counter::fma(work * V::WIDTH);
}

/// Sums the lane accumulators into `out` (one scalar per DoF).
pub fn reduce_lanes<T: Real, V: Lanes<T>>(acc: &mut [V], out: &mut [T]) {
    for (o, a) in out.iter_mut().zip(acc.iter_mut()) {
        *o += a.horizontal_sum();
        *a = V::zero();
    }
    counter::overhead(acc.len() * V::WIDTH);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::shape::ShapeInfo;
    use crate::lanes::Pack;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the tensor basis: products of 1D Lagrange
    /// polynomials written out from their definition.
    fn direct(nodes: &[f64], nd: usize, u: &[f64], x: [f64; 3]) -> (f64, [f64; 3]) {
        let k = nodes.len();
        let lag = |i: usize, t: f64| -> f64 {
            (0..k).filter(|&j| j != i).map(|j| (t - nodes[j]) / (nodes[i] - nodes[j])).product()
        };
        let dlag = |i: usize, t: f64| -> f64 {
            let mut s = 0.0;
            for m in 0..k {
                if m == i {
                    continue;
                }
                let mut p = 1.0 / (nodes[i] - nodes[m]);
                for j in 0..k {
                    if j != i && j != m {
                        p *= (t - nodes[j]) / (nodes[i] - nodes[j]);
                    }
                }
                s += p;
            }
            s
        };
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for l in 0..k.pow(nd as u32) {
            let idx = [l % k, (l / k) % k, l / (k * k)];
            let phi: f64 = (0..nd).map(|a| lag(idx[a], x[a])).product();
            v += phi * u[l];
            for b in 0..nd {
                let d: f64 = (0..nd).map(|a| if a == b { dlag(idx[a], x[a]) } else { lag(idx[a], x[a]) }).product();
                g[b] += d * u[l];
            }
        }
        (v, g)
    }

    fn setup(p: usize, nd: usize, seed: u64) -> (ShapeInfo<f64>, Vec<f64>, Vec<[f64; 3]>) {
        let shape = ShapeInfo::standard(p).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let u = (0..shape.k.pow(nd as u32)).map(|_| r.gen_range(-1.0..1.0)).collect();
        let pts = (0..4).map(|_| [r.gen::<f64>(), r.gen::<f64>(), r.gen::<f64>()]).collect();
        (shape, u, pts)
    }

    #[test]
    fn matches_direct_evaluation() {
        for nd in 1..=3 {
            for p in 1..=5 {
                let (shape, u, pts) = setup(p, nd, p as u64);
                let mut b = PointBasis::<Pack<f64, 4>>::new(shape.k);
                let mut s = PointScratch::new(shape.k);
                b.fill(&shape.basis, nd, &pts);
                let (v, g) = eval_point(nd, &u, &b, &mut s);
                let vo = eval_point_value(nd, &u, &b, &mut s);
                for (lane, x) in pts.iter().enumerate() {
                    let (ev, eg) = direct(&shape.basis.nodes, nd, &u, *x);
                    assert!((v.0[lane] - ev).abs() < 1e-12);
                    assert!((vo.0[lane] - ev).abs() < 1e-12);
                    for a in 0..nd {
                        assert!((g[a].0[lane] - eg[a]).abs() < 1e-10, "nd={nd} p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn padding_repeats_last_point() {
        let (shape, u, pts) = setup(2, 3, 9);
        let mut b = PointBasis::<Pack<f64, 4>>::new(shape.k);
        let mut s = PointScratch::new(shape.k);
        b.fill(&shape.basis, 3, &pts[..2]);
        let v = eval_point_value(3, &u, &b, &mut s);
        assert_eq!(v.0[1], v.0[2]);
        assert_eq!(v.0[1], v.0[3]);
    }

    #[test]
    fn integration_is_adjoint() {
        for nd in 1..=3 {
            for p in 1..=4 {
                let (shape, u, pts) = setup(p, nd, 40 + p as u64);
                let k = shape.k;
                let n = k.pow(nd as u32);
                let mut b = PointBasis::<Pack<f64, 4>>::new(k);
                let mut s = PointScratch::new(k);
                b.fill(&shape.basis, nd, &pts);
                let rv = Pack([0.3, -1.2, 0.7, 2.0]);
                let rg = [Pack([1.0, 0.5, -0.25, 0.1]), Pack([-0.4, 0.9, 0.3, 1.5]), Pack([0.2, 0.2, -1.0, 0.6])];
                let (v, g) = eval_point(nd, &u, &b, &mut s);
                let mut lhs = (v * rv).horizontal_sum();
                for a in 0..nd {
                    lhs += (g[a] * rg[a]).horizontal_sum();
                }
                let mut acc = vec![Pack::<f64, 4>::default(); n];
                integrate_point(nd, rv, rg, &b, &mut acc, &mut s);
                let mut out = vec![0.0; n];
                reduce_lanes(&mut acc, &mut out);
                let rhs: f64 = out.iter().zip(&u).map(|(a, b)| a * b).sum();
                assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
                assert!(acc.iter().all(|a| a.horizontal_sum() == 0.0));

                let vo = eval_point_value(nd, &u, &b, &mut s);
                integrate_point_value(nd, rv, &b, &mut acc, &mut s);
                let mut out = vec![0.0; n];
                reduce_lanes(&mut acc, &mut out);
                let rhs: f64 = out.iter().zip(&u).map(|(a, b)| a * b).sum();
                assert!(((vo * rv).horizontal_sum() - rhs).abs() < 1e-11);
            }
        }
    }

    #[cfg(feature = "flop-count")]
    #[test]
    fn counts_follow_staged_model() {
        for p in 1..=4 {
            let (shape, u, pts) = setup(p, 3, 3);
            let k = shape.k;
            let mut b = PointBasis::<Pack<f64, 4>>::new(k);
            let mut s = PointScratch::new(k);
            b.fill(&shape.basis, 3, &pts);
            let (_, t) = counter::counted(|| eval_point(3, &u, &b, &mut s)).unwrap();
            assert_eq!(t.kernel, (2 * (2 * k.pow(3) + 3 * k * k + 4 * k) * 4) as u64);
            assert_eq!(t.overhead, 0);
            let mut acc = vec![Pack::<f64, 4>::default(); k.pow(3)];
            let (_, t) = counter::counted(|| {
                integrate_point(3, Pack([1.0; 4]), [Pack([1.0; 4]); 3], &b, &mut acc, &mut s)
            })
            .unwrap();
            assert_eq!(t.kernel, (2 * (2 * k.pow(3) + 3 * k * k + 4 * k) * 4) as u64);
        }
    }
}
