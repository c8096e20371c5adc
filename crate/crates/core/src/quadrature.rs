//! Tensor-product Gauss–Hermite quadrature for Gaussian expectations.

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Highest dimension for which tensor-product rules are allowed.
pub const MAX_QUADRATURE_DIM: usize = 4;

/// Nodes and weights for `int exp(-x^2) f(x) dx`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 200 {
            return Err(Error::invalid(format!("Gauss-Hermite order {order} out of range 1..=200")));
        }
        let n = order;
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => ((2 * n + 1) as f64).sqrt() - 1.85575 * ((2 * n + 1) as f64).powf(-0.16667),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        Ok(Self { nodes: x, weights: w })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(center + eps Z)]` with `Z ~ N(0, I)`, by tensor-product rule.
    pub fn gaussian_expectation(&self, center: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Result<f64> {
        let dim = center.len();
        if dim > MAX_QUADRATURE_DIM {
            return Err(Error::QuadratureDimension {
                dim,
                max: MAX_QUADRATURE_DIM,
            });
        }
        let q = self.order();
        let total = q.pow(dim as u32);
        let scale = std::f64::consts::SQRT_2 * eps;
        let norm = std::f64::consts::PI.powf(-(dim as f64) / 2.0);
        let mut x = vec![0.0; dim];
        let mut terms = Vec::with_capacity(total);
        for idx in 0..total {
            let mut r = idx;
            let mut wt = norm;
            for k in 0..dim {
                let j = r % q;
                r /= q;
                x[k] = center[k] + scale * self.nodes[j];
                wt *= self.weights[j];
            }
            terms.push(wt * f(&x));
        }
        Ok(pairwise_sum(&terms))
    }
}
