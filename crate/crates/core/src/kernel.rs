//! Reproducing kernels and the derivatives needed to apply first-order
//! differential functionals in either argument.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `exp(-|x - y|^2 / (2 sigma^2))`
    Gaussian,
}

/// Kernel with closed-form value, gradients and mixed second derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelModel {
    family: KernelFamily,
    sigma: f64,
}

pub const DEFAULT_SIGMA: f64 = 3.0;

impl Default for KernelModel {
    fn default() -> Self {
        KernelModel { family: KernelFamily::Gaussian, sigma: DEFAULT_SIGMA }
    }
}

impl KernelModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel length-scale must be positive, got {sigma}")));
        }
        Ok(KernelModel { family: KernelFamily::Gaussian, sigma })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 / (2.0 * self.sigma * self.sigma)).exp()
            }
        }
    }

    /// `grad_y k(x, y)`, written into `out`; returns `k(x, y)` as a by-product.
    pub fn grad_y_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let k = self.value(x, y);
                let s2 = self.sigma * self.sigma;
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = (a - b) / s2 * k;
                }
                k
            }
        }
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.grad_y_into(x, y, &mut out);
        out
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        // radial kernel: grad_x k(x, y) = grad_y k(y, x)
        self.grad_y(y, x)
    }

    /// Mixed derivative `H[a][b] = d^2 k / (dx_a dy_b)`, row-major `d x d` in `out`.
    pub fn cross_hessian_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
        let d = x.len();
        match self.family {
            KernelFamily::Gaussian => {
                let k = self.value(x, y);
                let s2 = self.sigma * self.sigma;
                let s4 = s2 * s2;
                for a in 0..d {
                    let da = x[a] - y[a];
                    for b in 0..d {
                        let db = x[b] - y[b];
                        let delta = if a == b { 1.0 / s2 } else { 0.0 };
                        out[a * d + b] = (delta - da * db / s4) * k;
                    }
                }
                k
            }
        }
    }

    pub fn cross_hessian(&self, x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
        let d = x.len();
        let mut flat = vec![0.0; d * d];
        self.cross_hessian_into(x, y, &mut flat);
        flat.chunks(d).map(<[f64]>::to_vec).collect()
    }
}

/// A first-order point functional `u -> c . grad u(p) + c0 u(p)`.
///
/// Every constraint of the collocation problem has this shape: PDE samples
/// (`c = f(p)`, `c0 = -lambda`), the value at the origin (`c = 0`, `c0 = 1`)
/// and partial derivatives at the origin (`c = e_l`, `c0 = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PointFunctional {
    pub point: Vec<f64>,
    pub grad_coeff: Vec<f64>,
    pub value_coeff: f64,
}

impl KernelModel {
    /// `L^x M^y k(x, y)`: `lhs` acting on the first argument, `rhs` on the second.
    pub fn apply_pair(&self, lhs: &PointFunctional, rhs: &PointFunctional) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let s2 = self.sigma * self.sigma;
                let mut r2 = 0.0;
                let mut cc = 0.0;
                let mut l_delta = 0.0;
                let mut r_delta = 0.0;
                for i in 0..lhs.point.len() {
                    let delta = lhs.point[i] - rhs.point[i];
                    r2 += delta * delta;
                    cc += lhs.grad_coeff[i] * rhs.grad_coeff[i];
                    l_delta += lhs.grad_coeff[i] * delta;
                    r_delta += rhs.grad_coeff[i] * delta;
                }
                let k = (-r2 / (2.0 * s2)).exp();
                k * (cc / s2 - l_delta * r_delta / (s2 * s2) - rhs.value_coeff * l_delta / s2
                    + lhs.value_coeff * r_delta / s2
                    + lhs.value_coeff * rhs.value_coeff)
            }
        }
    }

    /// The Riesz representer of `rhs` evaluated at `x`: `(M^y k)(x, .)`.
    pub fn apply_right(&self, x: &[f64], rhs: &PointFunctional) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let s2 = self.sigma * self.sigma;
                let mut r2 = 0.0;
                let mut r_delta = 0.0;
                for i in 0..x.len() {
                    let delta = x[i] - rhs.point[i];
                    r2 += delta * delta;
                    r_delta += rhs.grad_coeff[i] * delta;
                }
                let k = (-r2 / (2.0 * s2)).exp();
                k * (r_delta / s2 + rhs.value_coeff)
            }
        }
    }

    /// Gradient in `x` of [`KernelModel::apply_right`], accumulated as `out += weight * grad`.
    pub fn apply_right_grad_acc(&self, x: &[f64], rhs: &PointFunctional, weight: f64, out: &mut [f64]) {
        match self.family {
            KernelFamily::Gaussian => {
                let s2 = self.sigma * self.sigma;
                let mut r2 = 0.0;
                let mut r_delta = 0.0;
                for i in 0..x.len() {
                    let delta = x[i] - rhs.point[i];
                    r2 += delta * delta;
                    r_delta += rhs.grad_coeff[i] * delta;
                }
                let k = weight * (-r2 / (2.0 * s2)).exp();
                // H c + c0 grad_x k, with H = (I/s2 - delta delta^T / s2^2) k
                for i in 0..x.len() {
                    let delta = x[i] - rhs.point[i];
                    out[i] += k * (rhs.grad_coeff[i] / s2 - delta * r_delta / (s2 * s2) - rhs.value_coeff * delta / s2);
                }
            }
        }
    }
}
