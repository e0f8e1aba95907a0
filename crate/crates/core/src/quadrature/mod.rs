//! Structured (tensor-product Gauss) rules and the cut-entity generators.

pub mod cut;
pub mod root;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_GAUSS_POINTS: usize = 32;

/// One-dimensional rule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature1D<T> {
    pub points: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> Quadrature1D<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |s, (&x, &w)| s + w * f(x))
    }
}

/// Legendre polynomial `P_n(x)` and its derivative on `[-1, 1]`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule mapped to `[0, 1]`, exact for polynomials of
/// degree `2n - 1`.
pub fn gauss_rule<T: Real>(n: usize) -> Result<Quadrature1D<T>> {
    if n == 0 || n > MAX_GAUSS_POINTS {
        return Err(Error::UnsupportedRule(n));
    }
    let mut pts = vec![0.0f64; n];
    let mut wts = vec![0.0f64; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // ascending order on [0, 1]
        pts[i] = 0.5 * (1.0 - x);
        pts[n - 1 - i] = 0.5 * (1.0 + x);
        wts[i] = 0.5 * w;
        wts[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        pts[n / 2] = 0.5;
    }
    Ok(Quadrature1D {
        points: pts.into_iter().map(T::of).collect(),
        weights: wts.into_iter().map(T::of).collect(),
    })
}

/// `k` Gauss–Lobatto nodes on `[0, 1]` (endpoints included), `k >= 2`.
pub fn gauss_lobatto_nodes<T: Real>(k: usize) -> Result<Vec<T>> {
    if !(2..=MAX_GAUSS_POINTS).contains(&k) {
        return Err(Error::UnsupportedDegree(k.saturating_sub(1)));
    }
    let n = k - 1;
    let mut nodes = vec![0.0f64; k];
    nodes[k - 1] = 1.0;
    // interior nodes are the roots of P'_n
    for i in 1..n {
        let mut x = -(std::f64::consts::PI * i as f64 / n as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            // P''_n from the Legendre ODE
            let d2p = (2.0 * x * dp - (n * (n + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 + x);
    }
    Ok(nodes.into_iter().map(T::of).collect())
}

/// Tensor product rule on the reference cell `[0,1]^dim`; points are stored
/// with x running fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorQuadrature<T> {
    pub dim: usize,
    pub rule: Quadrature1D<T>,
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
}

impl<T: Real> TensorQuadrature<T> {
    pub fn new(dim: usize, rule: Quadrature1D<T>) -> Self {
        let n = rule.len();
        let total = n.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for idx in 0..total {
            let mut p = [T::zero(); 3];
            let mut w = T::one();
            let mut rem = idx;
            for a in 0..dim {
                let i = rem % n;
                rem /= n;
                p[a] = rule.points[i];
                w *= rule.weights[i];
            }
            points.push(p);
            weights.push(w);
        }
        Self { dim, rule, points, weights }
    }

    pub fn gauss(dim: usize, n: usize) -> Result<Self> {
        Ok(Self::new(dim, gauss_rule(n)?))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule_closed_form() {
        let q = gauss_rule::<f64>(2).unwrap();
        let s3 = 3f64.sqrt();
        assert!((q.points[0] - (3.0 - s3) / 6.0).abs() < 1e-15);
        assert!((q.points[1] - (3.0 + s3) / 6.0).abs() < 1e-15);
        assert!(q.weights.iter().all(|w| (w - 0.5).abs() < 1e-15));
        assert!((q.integrate(|x| x * x * x) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn one_point_rule() {
        let q = gauss_rule::<f64>(1).unwrap();
        assert_eq!(q.points, vec![0.5]);
        assert_eq!(q.weights, vec![1.0]);
    }

    #[test]
    fn unsupported_sizes() {
        assert_eq!(gauss_rule::<f64>(0), Err(Error::UnsupportedRule(0)));
        assert_eq!(gauss_rule::<f64>(33), Err(Error::UnsupportedRule(33)));
    }

    #[test]
    fn exactness_up_to_degree_2n_minus_1() {
        for n in 1..=MAX_GAUSS_POINTS {
            let q = gauss_rule::<f64>(n).unwrap();
            let sum: f64 = q.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-14, "n={n}");
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for deg in 0..2 * n {
                let exact = 1.0 / (deg as f64 + 1.0);
                let got = q.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-14, "n={n} deg={deg}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn lobatto_nodes_known_values() {
        let n = gauss_lobatto_nodes::<f64>(3).unwrap();
        assert_eq!(n, vec![0.0, 0.5, 1.0]);
        let n = gauss_lobatto_nodes::<f64>(4).unwrap();
        let a = 0.5 * (1.0 - 1.0 / 5f64.sqrt());
        assert!((n[1] - a).abs() < 1e-15 && (n[2] - (1.0 - a)).abs() < 1e-15);
        for k in 2..12 {
            let n = gauss_lobatto_nodes::<f64>(k).unwrap();
            assert!(n.windows(2).all(|w| w[0] < w[1]));
            for i in 0..k {
                assert!((n[i] + n[k - 1 - i] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_rule_weights_sum_to_one() {
        let t = TensorQuadrature::<f64>::gauss(3, 4).unwrap();
        assert_eq!(t.len(), 64);
        let s: f64 = t.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        // x fastest
        assert_eq!(t.points[1][1], t.points[0][1]);
        assert!(t.points[1][0] > t.points[0][0]);
    }
}
