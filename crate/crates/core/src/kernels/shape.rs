//! One-dimensional shape function tables.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_lobatto_nodes, gauss_rule, Quadrature1D};
use crate::scalar::Real;

pub const MAX_DEGREE: usize = 7;

/// Lagrange basis on fixed nodes, evaluated in O(k) per point from prefix
/// and suffix products.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeBasis<T> {
    pub nodes: Vec<T>,
    inv_denominators: Vec<T>,
}

impl<T: Real> LagrangeBasis<T> {
    pub fn new(nodes: Vec<T>) -> Self {
        let inv_denominators = (0..nodes.len())
            .map(|i| {
                let d = (0..nodes.len())
                    .filter(|&j| j != i)
                    .fold(T::one(), |p, j| p * (nodes[i] - nodes[j]));
                T::one() / d
            })
            .collect();
        Self { nodes, inv_denominators }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values and first derivatives of all basis functions at `x`.
    /// Returns the number of floating point operations spent.
    pub fn eval(&self, x: T, values: &mut [T], derivs: &mut [T]) -> usize {
        let k = self.nodes.len();
        // prefix[i] = prod_{j<i} (x - x_j), suffix analogously; derivatives
        // carried along with the product rule
        let mut p = T::one();
        let mut dp = T::zero();
        for i in 0..k {
            values[i] = p;
            derivs[i] = dp;
            let f = x - self.nodes[i];
            dp = dp * f + p;
            p *= f;
        }
        let mut s = T::one();
        let mut ds = T::zero();
        for i in (0..k).rev() {
            let w = self.inv_denominators[i];
            derivs[i] = w * (derivs[i] * s + values[i] * ds);
            values[i] = w * values[i] * s;
            let f = x - self.nodes[i];
            ds = ds * f + s;
            s *= f;
        }
        14 * k
    }
}

/// Tabulated 1D shape data for degree `p` Lagrange elements at the
/// Gauss–Lobatto nodes, with `n_q` Gauss points per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeInfo<T> {
    pub degree: usize,
    pub k: usize,
    pub n_q: usize,
    pub basis: LagrangeBasis<T>,
    pub quad: Quadrature1D<T>,
    /// `values[q * k + i] = l_i(x_q)`.
    pub values: Vec<T>,
    /// `gradients[q * k + i] = l_i'(x_q)`.
    pub gradients: Vec<T>,
    /// Derivative of the Lagrange basis on the Gauss points, evaluated at
    /// the Gauss points: `colloc[q * n_q + r] = L_r'(x_q)`.
    pub colloc: Vec<T>,
    /// Basis values at the face coordinates 0 and 1.
    pub face_values: [Vec<T>; 2],
    pub face_gradients: [Vec<T>; 2],
    /// Values at `x_q - 1` (index 0) and `x_q + 1` (index 1): the basis of
    /// a neighbor, seen from this cell's quadrature points.
    pub shifted_values: [Vec<T>; 2],
    pub shifted_gradients: [Vec<T>; 2],
}

impl<T: Real> ShapeInfo<T> {
    pub fn new(degree: usize, n_q: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        let k = degree + 1;
        let basis = LagrangeBasis::new(gauss_lobatto_nodes(k)?);
        let quad = gauss_rule(n_q)?;
        let table = |shift: T| -> (Vec<T>, Vec<T>) {
            let mut v = vec![T::zero(); n_q * k];
            let mut g = vec![T::zero(); n_q * k];
            for q in 0..n_q {
                basis.eval(quad.points[q] + shift, &mut v[q * k..(q + 1) * k], &mut g[q * k..(q + 1) * k]);
            }
            (v, g)
        };
        let (values, gradients) = table(T::zero());
        let (vm, gm) = table(-T::one());
        let (vp, gp) = table(T::one());
        let gauss_basis = LagrangeBasis::new(quad.points.clone());
        let mut colloc = vec![T::zero(); n_q * n_q];
        let mut tmp = vec![T::zero(); n_q];
        for q in 0..n_q {
            gauss_basis.eval(quad.points[q], &mut tmp, &mut colloc[q * n_q..(q + 1) * n_q]);
        }
        let at = |x: T| {
            let mut v = vec![T::zero(); k];
            let mut g = vec![T::zero(); k];
            basis.eval(x, &mut v, &mut g);
            (v, g)
        };
        let (f0, g0) = at(T::zero());
        let (f1, g1) = at(T::one());
        Ok(Self {
            degree,
            k,
            n_q,
            basis,
            quad,
            values,
            gradients,
            colloc,
            face_values: [f0, f1],
            face_gradients: [g0, g1],
            shifted_values: [vm, vp],
            shifted_gradients: [gm, gp],
        })
    }

    /// Tables with `n_q = k`, the default for operator evaluation.
    pub fn standard(degree: usize) -> Result<Self> {
        Self::new(degree, degree + 1)
    }
}
