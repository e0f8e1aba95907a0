//! Sum-factorized evaluation and integration on tensor-product quadrature:
//! cells, faces, and extrapolation into a neighbor.
//!
//! Tensors are stored with x running fastest. Every routine works on arrays
//! of [`Lanes`], so a batch of cells is processed at once with one cell per
//! lane.

use crate::kernels::counter;
use crate::kernels::shape::ShapeInfo;
use crate::lanes::Lanes;
use crate::scalar::Real;

/// Applies a 1D matrix along axis `dir` of the tensor `src` with extents
/// `sizes` (`sizes[dir] == n`). Without `transpose`, `mat` is `m x n` row
/// major; with it, `mat` is `n x m` and its transpose is applied. The output
/// has `sizes[dir]` replaced by `m`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn apply_1d<T: Real, V: Lanes<T>>(
    mat: &[T],
    m: usize,
    n: usize,
    transpose: bool,
    dir: usize,
    sizes: [usize; 3],
    src: &[V],
    dst: &mut [V],
    add: bool,
) {
    debug_assert_eq!(sizes[dir], n);
    let pre: usize = sizes[..dir].iter().product();
    let post: usize = sizes[dir + 1..].iter().product();
    let (rs, cs) = if transpose { (1, m) } else { (n, 1) };
    for p in 0..post {
        let src_p = &src[pre * n * p..pre * n * (p + 1)];
        let dst_p = &mut dst[pre * m * p..pre * m * (p + 1)];
        for r in 0..m {
            let row = &mat[r * rs..];
            for i in 0..pre {
                let mut acc = src_p[i] * row[0];
                for c in 1..n {
                    acc += src_p[i + pre * c] * row[c * cs];
                }
                if add {
                    dst_p[i + pre * r] += acc;
                } else {
                    dst_p[i + pre * r] = acc;
                }
            }
        }
    }
    counter::fma(m * n * pre * post * V::WIDTH);
}

/// Work arrays for the sum-factorization kernels, sized for `ShapeInfo`.
#[derive(Clone, Debug)]
pub struct Scratch<V> {
    a: Vec<V>,
    b: Vec<V>,
    c: Vec<V>,
    f: Vec<V>,
}

impl<V: Copy> Scratch<V> {
    pub fn new<T: Real>(shape: &ShapeInfo<T>) -> Self
    where
        V: Lanes<T>,
    {
        let n = shape.k.max(shape.n_q).pow(3);
        let z = V::zero();
        Self { a: vec![z; n], b: vec![z; n], c: vec![z; n], f: vec![z; 3 * n] }
    }
}

fn extents(dim: usize, n: usize) -> [usize; 3] {
    let mut s = [1; 3];
    for v in s.iter_mut().take(dim) {
        *v = n;
    }
    s
}

/// Tensor-product interpolation with one matrix per axis. Forward maps
/// `n^dim -> m^dim` with `m x n` matrices; `transpose` maps back.
#[allow(clippy::too_many_arguments)]
fn tensor_apply<T: Real, V: Lanes<T>>(
    dim: usize,
    mats: [&[T]; 3],
    m: usize,
    n: usize,
    transpose: bool,
    src: &[V],
    dst: &mut [V],
    a: &mut [V],
    b: &mut [V],
) {
    let (from, to) = if transpose { (m, n) } else { (n, m) };
    let mut sizes = extents(dim, from);
    let len = |s: [usize; 3]| s[0] * s[1] * s[2];
    match dim {
        1 => apply_1d(mats[0], m, n, transpose, 0, sizes, src, dst, false),
        2 => {
            let l0 = len([to, from, 1]);
            apply_1d(mats[0], m, n, transpose, 0, sizes, src, &mut a[..l0], false);
            sizes[0] = to;
            apply_1d(mats[1], m, n, transpose, 1, sizes, &a[..l0], dst, false);
        }
        _ => {
            let l0 = len([to, from, from]);
            apply_1d(mats[0], m, n, transpose, 0, sizes, src, &mut a[..l0], false);
            sizes[0] = to;
            let l1 = len([to, to, from]);
            apply_1d(mats[1], m, n, transpose, 1, sizes, &a[..l0], &mut b[..l1], false);
            sizes[1] = to;
            apply_1d(mats[2], m, n, transpose, 2, sizes, &b[..l1], dst, false);
        }
    }
}

/// Values at the `n_q^dim` tensor points from `k^dim` DoF values, using a
/// possibly different 1D table per axis (`n_q x k` each).
pub fn eval_values_with<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    tables: [&[T]; 3],
    dofs: &[V],
    values: &mut [V],
    s: &mut Scratch<V>,
) {
    tensor_apply(dim, tables, shape.n_q, shape.k, false, dofs, values, &mut s.a, &mut s.b);
}

/// Transpose of [`eval_values_with`]; overwrites `dofs`.
pub fn integrate_values_with<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    tables: [&[T]; 3],
    values: &[V],
    dofs: &mut [V],
    s: &mut Scratch<V>,
) {
    tensor_apply(dim, tables, shape.n_q, shape.k, true, values, dofs, &mut s.a, &mut s.b);
}

pub fn eval_values<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    dofs: &[V],
    values: &mut [V],
    s: &mut Scratch<V>,
) {
    let t = &shape.values[..];
    eval_values_with(shape, dim, [t, t, t], dofs, values, s);
}

/// Values of the neighbor polynomial on this cell's quadrature points: the
/// neighbor lies at `-e_dir` (`side == 0`) or `+e_dir` (`side == 1`), so its
/// reference coordinate along `dir` is shifted by `+1` or `-1`.
pub fn eval_extrapolated<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    dir: usize,
    side: usize,
    neighbor_dofs: &[V],
    values: &mut [V],
    s: &mut Scratch<V>,
) {
    let t = &shape.values[..];
    let mut tables = [t, t, t];
    tables[dir] = &shape.shifted_values[1 - side][..];
    eval_values_with(shape, dim, tables, neighbor_dofs, values, s);
}

pub fn integrate_extrapolated<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    dir: usize,
    side: usize,
    values: &[V],
    neighbor_dofs: &mut [V],
    s: &mut Scratch<V>,
) {
    let t = &shape.values[..];
    let mut tables = [t, t, t];
    tables[dir] = &shape.shifted_values[1 - side][..];
    integrate_values_with(shape, dim, tables, values, neighbor_dofs, s);
}

/// Values and reference-coordinate gradients at the tensor points: three
/// interpolation sweeps followed by the collocation derivative per axis.
/// `grads` holds `dim` blocks of `n_q^dim`.
pub fn eval_cell<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    dofs: &[V],
    values: &mut [V],
    grads: &mut [V],
    s: &mut Scratch<V>,
) {
    let nq = shape.n_q;
    let np = nq.pow(dim as u32);
    eval_values(shape, dim, dofs, values, s);
    let sizes = extents(dim, nq);
    for a in 0..dim {
        apply_1d(&shape.colloc, nq, nq, false, a, sizes, values, &mut grads[a * np..(a + 1) * np], false);
    }
}

/// Transpose of [`eval_cell`]: test-function values (optional) and
/// gradients (optional) at the tensor points to DoF contributions, which
/// overwrite `dofs`.
pub fn integrate_cell<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    values: Option<&[V]>,
    grads: Option<&[V]>,
    dofs: &mut [V],
    s: &mut Scratch<V>,
) {
    let nq = shape.n_q;
    let np = nq.pow(dim as u32);
    let sizes = extents(dim, nq);
    let mut acc = std::mem::take(&mut s.c);
    let mut have = false;
    if let Some(v) = values {
        acc[..np].copy_from_slice(&v[..np]);
        have = true;
    }
    if let Some(g) = grads {
        for a in 0..dim {
            apply_1d(&shape.colloc, nq, nq, true, a, sizes, &g[a * np..(a + 1) * np], &mut acc[..np], have);
            have = true;
        }
    }
    if !have {
        acc[..np].iter_mut().for_each(|x| *x = V::zero());
    }
    let t = &shape.values[..];
    integrate_values_with(shape, dim, [t, t, t], &acc[..np], dofs, s);
    s.c = acc;
}

/// Cell DoF index of face node `t` (x fastest over the tangential axes in
/// increasing order) at position `layer` along the face normal `dir`.
#[inline]
pub fn face_node_index(k: usize, dim: usize, dir: usize, t: usize, layer: usize) -> usize {
    let mut idx = 0;
    let mut rem = t;
    let mut stride = 1;
    for a in 0..dim {
        if a == dir {
            idx += layer * stride;
        } else {
            idx += (rem % k) * stride;
            rem /= k;
        }
        stride *= k;
    }
    idx
}

/// Reduces cell DoFs to the face: values (exact restriction thanks to the
/// nodal Lobatto basis) and normal derivatives (one contraction per face
/// node). Normal derivatives are in reference coordinates.
pub fn face_dofs<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    face_no: usize,
    dofs: &[V],
    values: &mut [V],
    normal: &mut [V],
) {
    let (dir, side) = (face_no / 2, face_no % 2);
    let k = shape.k;
    let nf = k.pow(dim as u32 - 1);
    let layer = if side == 0 { 0 } else { k - 1 };
    let dn = &shape.face_gradients[side];
    for t in 0..nf {
        values[t] = dofs[face_node_index(k, dim, dir, t, layer)];
        let mut acc = dofs[face_node_index(k, dim, dir, t, 0)] * dn[0];
        for i in 1..k {
            acc += dofs[face_node_index(k, dim, dir, t, i)] * dn[i];
        }
        normal[t] = acc;
    }
    counter::fma(nf * k * V::WIDTH);
}

/// Transpose of [`face_dofs`]; adds into `dofs`.
pub fn face_dofs_transpose<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    face_no: usize,
    values: Option<&[V]>,
    normal: Option<&[V]>,
    dofs: &mut [V],
) {
    let (dir, side) = (face_no / 2, face_no % 2);
    let k = shape.k;
    let nf = k.pow(dim as u32 - 1);
    let layer = if side == 0 { 0 } else { k - 1 };
    if let Some(v) = values {
        for t in 0..nf {
            dofs[face_node_index(k, dim, dir, t, layer)] += v[t];
        }
    }
    if let Some(n) = normal {
        let dn = &shape.face_gradients[side];
        for t in 0..nf {
            for i in 0..k {
                dofs[face_node_index(k, dim, dir, t, i)] += n[t] * dn[i];
            }
        }
        counter::fma(nf * k * V::WIDTH);
    }
}

/// Values, reference normal derivative, and (optionally) tangential
/// reference derivatives at the `n_q^(dim-1)` face points of local face
/// `face_no = 2 * dir + side`.
#[allow(clippy::too_many_arguments)]
pub fn eval_face<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    face_no: usize,
    dofs: &[V],
    values: &mut [V],
    normal: &mut [V],
    tangential: Option<&mut [V]>,
    s: &mut Scratch<V>,
) {
    let fd = dim - 1;
    let k = shape.k;
    let nq = shape.n_q;
    let nf = k.pow(fd as u32);
    let np = nq.pow(fd as u32);
    let mut fv = std::mem::take(&mut s.f);
    {
        let (fval, fnorm) = fv.split_at_mut(nf);
        face_dofs(shape, dim, face_no, dofs, fval, &mut fnorm[..nf]);
        let t = &shape.values[..];
        tensor_apply(fd, [t, t, t], nq, k, false, fval, values, &mut s.a, &mut s.b);
        tensor_apply(fd, [t, t, t], nq, k, false, &fnorm[..nf], normal, &mut s.a, &mut s.b);
    }
    s.f = fv;
    if let Some(tg) = tangential {
        let sizes = extents(fd, nq);
        for j in 0..fd {
            apply_1d(&shape.colloc, nq, nq, false, j, sizes, &values[..np], &mut tg[j * np..(j + 1) * np], false);
        }
    }
}

/// Transpose of [`eval_face`]; adds into `dofs`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_face<T: Real, V: Lanes<T>>(
    shape: &ShapeInfo<T>,
    dim: usize,
    face_no: usize,
    values: Option<&[V]>,
    normal: Option<&[V]>,
    tangential: Option<&[V]>,
    dofs: &mut [V],
    s: &mut Scratch<V>,
) {
    let fd = dim - 1;
    let k = shape.k;
    let nq = shape.n_q;
    let nf = k.pow(fd as u32);
    let np = nq.pow(fd as u32);
    let t = &shape.values[..];
    let mut acc = std::mem::take(&mut s.c);
    let mut fv = std::mem::take(&mut s.f);
    let mut have = false;
    if let Some(v) = values {
        acc[..np].copy_from_slice(&v[..np]);
        have = true;
    }
    if let Some(tg) = tangential {
        let sizes = extents(fd, nq);
        for j in 0..fd {
            apply_1d(&shape.colloc, nq, nq, true, j, sizes, &tg[j * np..(j + 1) * np], &mut acc[..np], have);
            have = true;
        }
    }
    {
        let (fval, fnorm) = fv.split_at_mut(nf);
        if have {
            tensor_apply(fd, [t, t, t], nq, k, true, &acc[..np], fval, &mut s.a, &mut s.b);
        }
        if let Some(n) = normal {
            tensor_apply(fd, [t, t, t], nq, k, true, &n[..np], &mut fnorm[..nf], &mut s.a, &mut s.b);
        }
        face_dofs_transpose(
            shape,
            dim,
            face_no,
            have.then_some(&fval[..]),
            normal.map(|_| &fnorm[..nf]),
            dofs,
        );
    }
    s.c = acc;
    s.f = fv;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lanes::Pack;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    /// Dense evaluation of the tensor basis at reference point `x`.
    fn dense_eval(shape: &ShapeInfo<f64>, dim: usize, u: &[f64], x: [f64; 3]) -> (f64, [f64; 3]) {
        let k = shape.k;
        let mut v = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
        let mut d = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
        for a in 0..dim {
            shape.basis.eval(x[a], &mut v[a], &mut d[a]);
        }
        let mut val = 0.0;
        let mut g = [0.0; 3];
        for l in 0..k.pow(dim as u32) {
            let li = [l % k, (l / k) % k, l / (k * k)];
            let mut phi = 1.0;
            for a in 0..dim {
                phi *= v[a][li[a]];
            }
            val += phi * u[l];
            for b in 0..dim {
                let mut dphi = 1.0;
                for a in 0..dim {
                    dphi *= if a == b { d[a][li[a]] } else { v[a][li[a]] };
                }
                g[b] += dphi * u[l];
            }
        }
        (val, g)
    }

    fn tensor_point(shape: &ShapeInfo<f64>, dim: usize, q: usize) -> [f64; 3] {
        let n = shape.n_q;
        let mut x = [0.0; 3];
        let mut r = q;
        for xa in x.iter_mut().take(dim) {
            *xa = shape.quad.points[r % n];
            r /= n;
        }
        x
    }

    #[test]
    fn cell_eval_matches_dense_oracle() {
        for dim in [2, 3] {
            for p in 1..=4 {
                for nq in [p + 1, p + 2] {
                    let shape = ShapeInfo::<f64>::new(p, nq).unwrap();
                    let u = random(shape.k.pow(dim as u32), p as u64);
                    let np = nq.pow(dim as u32);
                    let mut vals = vec![0.0; np];
                    let mut grads = vec![0.0; dim * np];
                    let mut s = Scratch::new(&shape);
                    eval_cell(&shape, dim, &u, &mut vals, &mut grads, &mut s);
                    for q in 0..np {
                        let (v, g) = dense_eval(&shape, dim, &u, tensor_point(&shape, dim, q));
                        assert!((vals[q] - v).abs() < 1e-13);
                        for a in 0..dim {
                            assert!((grads[a * np + q] - g[a]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn constant_and_linear_reproduction() {
        let shape = ShapeInfo::<f64>::standard(3).unwrap();
        let k = shape.k;
        let u: Vec<f64> = (0..k * k * k).map(|l| shape.basis.nodes[l % k]).collect();
        let np = 64;
        let mut vals = vec![0.0; np];
        let mut grads = vec![0.0; 3 * np];
        let mut s = Scratch::new(&shape);
        eval_cell(&shape, 3, &u, &mut vals, &mut grads, &mut s);
        for q in 0..np {
            assert!((vals[q] - tensor_point(&shape, 3, q)[0]).abs() < 1e-14);
            assert!((grads[q] - 1.0).abs() < 1e-13);
            assert!(grads[np + q].abs() < 1e-13 && grads[2 * np + q].abs() < 1e-13);
        }
    }

    fn inner(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn norm(a: &[f64]) -> f64 {
        inner(a, a).sqrt()
    }

    #[test]
    fn cell_adjointness() {
        for dim in [2, 3] {
            for p in 1..=4 {
                let shape = ShapeInfo::<f64>::standard(p).unwrap();
                let nd = shape.k.pow(dim as u32);
                let np = shape.n_q.pow(dim as u32);
                let u = random(nd, 1);
                let wv = random(np, 2);
                let wg = random(dim * np, 3);
                let mut s = Scratch::new(&shape);
                let mut vals = vec![0.0; np];
                let mut grads = vec![0.0; dim * np];
                eval_cell(&shape, dim, &u, &mut vals, &mut grads, &mut s);
                let mut back = vec![0.0; nd];
                integrate_cell(&shape, dim, Some(&wv), Some(&wg), &mut back, &mut s);
                let lhs = inner(&vals, &wv) + inner(&grads, &wg);
                let rhs = inner(&u, &back);
                let scale = norm(&u) * (norm(&wv) + norm(&wg));
                assert!((lhs - rhs).abs() <= 1e-12 * scale, "dim={dim} p={p}");
            }
        }
    }

    #[test]
    fn face_eval_matches_dense_oracle() {
        for dim in [2, 3] {
            for p in 1..=4 {
                let shape = ShapeInfo::<f64>::standard(p).unwrap();
                let nq = shape.n_q;
                let u = random(shape.k.pow(dim as u32), 7);
                let np = nq.pow(dim as u32 - 1);
                let mut s = Scratch::new(&shape);
                for face in 0..2 * dim {
                    let (dir, side) = (face / 2, face % 2);
                    let mut v = vec![0.0; np];
                    let mut n = vec![0.0; np];
                    let mut tg = vec![0.0; (dim - 1) * np];
                    eval_face(&shape, dim, face, &u, &mut v, &mut n, Some(&mut tg), &mut s);
                    for q in 0..np {
                        let mut x = [0.0; 3];
                        let mut r = q;
                        let mut tangential_axes = Vec::new();
                        for a in 0..dim {
                            if a == dir {
                                x[a] = side as f64;
                            } else {
                                x[a] = shape.quad.points[r % nq];
                                r /= nq;
                                tangential_axes.push(a);
                            }
                        }
                        let (ev, eg) = dense_eval(&shape, dim, &u, x);
                        assert!((v[q] - ev).abs() < 1e-13);
                        assert!((n[q] - eg[dir]).abs() < 1e-11);
                        for (j, &a) in tangential_axes.iter().enumerate() {
                            assert!((tg[j * np + q] - eg[a]).abs() < 1e-11);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn face_adjointness() {
        for p in 1..=4 {
            let shape = ShapeInfo::<f64>::standard(p).unwrap();
            let nd = shape.k.pow(3);
            let np = shape.n_q.pow(2);
            let mut s = Scratch::new(&shape);
            for face in 0..6 {
                let u = random(nd, 11);
                let (wv, wn, wt) = (random(np, 12), random(np, 13), random(2 * np, 14));
                let mut v = vec![0.0; np];
                let mut n = vec![0.0; np];
                let mut tg = vec![0.0; 2 * np];
                eval_face(&shape, 3, face, &u, &mut v, &mut n, Some(&mut tg), &mut s);
                let mut back = vec![0.0; nd];
                integrate_face(&shape, 3, face, Some(&wv), Some(&wn), Some(&wt), &mut back, &mut s);
                let lhs = inner(&v, &wv) + inner(&n, &wn) + inner(&tg, &wt);
                let rhs = inner(&u, &back);
                let scale = norm(&u) * (norm(&wv) + norm(&wn) + norm(&wt));
                assert!((lhs - rhs).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn extrapolation_matches_neighbor_polynomial() {
        let shape = ShapeInfo::<f64>::standard(2).unwrap();
        let k = shape.k;
        let u = random(k * k * k, 5);
        let np = shape.n_q.pow(3);
        let mut s = Scratch::new(&shape);
        for dir in 0..3 {
            for side in 0..2 {
                let mut vals = vec![0.0; np];
                eval_extrapolated(&shape, 3, dir, side, &u, &mut vals, &mut s);
                for q in 0..np {
                    let mut x = tensor_point(&shape, 3, q);
                    // neighbor at -e_dir sees this point at x + 1
                    x[dir] += if side == 0 { 1.0 } else { -1.0 };
                    let (ev, _) = dense_eval(&shape, 3, &u, x);
                    assert!((vals[q] - ev).abs() < 1e-12);
                }
                let w = random(np, 9);
                let mut back = vec![0.0; k * k * k];
                integrate_extrapolated(&shape, 3, dir, side, &w, &mut back, &mut s);
                assert!((inner(&vals, &w) - inner(&u, &back)).abs() < 1e-12 * norm(&u) * norm(&w));
            }
        }
    }

    #[test]
    fn lanes_agree_with_scalar() {
        let shape = ShapeInfo::<f64>::standard(3).unwrap();
        let nd = 64;
        let np = 64;
        let cells: Vec<Vec<f64>> = (0..4).map(|c| random(nd, 20 + c)).collect();
        let packed: Vec<Pack<f64, 4>> = (0..nd).map(|i| Pack([0, 1, 2, 3].map(|c| cells[c][i]))).collect();
        let mut sp = Scratch::new(&shape);
        let mut vp = vec![Pack::<f64, 4>::default(); np];
        let mut gp = vec![Pack::<f64, 4>::default(); 3 * np];
        eval_cell(&shape, 3, &packed, &mut vp, &mut gp, &mut sp);
        let mut ss = Scratch::new(&shape);
        for (c, u) in cells.iter().enumerate() {
            let mut v = vec![0.0; np];
            let mut g = vec![0.0; 3 * np];
            eval_cell(&shape, 3, u, &mut v, &mut g, &mut ss);
            for q in 0..np {
                assert_eq!(vp[q].0[c], v[q]);
            }
            for q in 0..3 * np {
                assert_eq!(gp[q].0[c], g[q]);
            }
        }
    }

    #[cfg(feature = "flop-count")]
    #[test]
    fn structured_counts_match_model() {
        for p in 1..=4 {
            let shape = ShapeInfo::<f64>::standard(p).unwrap();
            let (k, nq) = (shape.k, shape.n_q);
            let model = k.pow(3) * nq + k * k * nq * nq + nq.pow(3) * k + 3 * nq.pow(4);
            let mut s = Scratch::new(&shape);
            let u = random(k.pow(3), 1);
            let mut v = vec![0.0; nq.pow(3)];
            let mut g = vec![0.0; 3 * nq.pow(3)];
            let (_, t) = counter::counted(|| eval_cell(&shape, 3, &u, &mut v, &mut g, &mut s)).unwrap();
            assert_eq!(t.kernel, 2 * model as u64);
            let mut back = vec![0.0; k.pow(3)];
            let (_, t) =
                counter::counted(|| integrate_cell(&shape, 3, Some(&v), Some(&g), &mut back, &mut s)).unwrap();
            assert_eq!(t.kernel, 2 * model as u64);
            let face_model = k * k * nq + nq * nq * k + 2 * nq.pow(3) + k.pow(3) + k * k * nq + nq * nq * k;
            let np = nq * nq;
            let mut fv = vec![0.0; np];
            let mut fnm = vec![0.0; np];
            let mut tg = vec![0.0; 2 * np];
            let (_, t) = counter::counted(|| {
                eval_face(&shape, 3, 3, &u, &mut fv, &mut fnm, Some(&mut tg), &mut s)
            })
            .unwrap();
            assert_eq!(t.kernel, 2 * face_model as u64);
        }
    }
}
