//! Principal Koopman eigenfunctions `phi(x) = w^T x + h(x)`.

use crate::collocation::{CollocationProblem, CollocationSolution, Regularization};
use crate::domain::BoxDomain;
use crate::dynamics::{nonlinear_part, step_count, Linearization, Rk4};
use crate::error::{Error, Result};
use crate::expr::{ExprAST, VectorField};
use crate::kernel::KernelModel;

/// Anything that behaves like a principal eigenfunction: a value, a gradient
/// and the eigenvalue it belongs to.
pub trait EigenfunctionLike: Sync {
    fn lambda(&self) -> f64;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Kernel approximation `phi*(x) = w^T x + h*(x)`.
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    lambda: f64,
    w: Vec<f64>,
    h: CollocationSolution,
}

impl Eigenfunction {
    pub fn new(h: CollocationSolution) -> Self {
        let lambda = h.problem().lambda();
        let w = h.problem().w().to_vec();
        Eigenfunction { lambda, w, h }
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn nonlinear_part(&self) -> &CollocationSolution {
        &self.h
    }

    pub fn evaluate_phi(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.h.evaluate_h(x)
    }

    pub fn evaluate_grad_phi(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.h.evaluate_grad_h(x);
        for (gi, wi) in g.iter_mut().zip(&self.w) {
            *gi += wi;
        }
        g
    }

    /// `grad phi*(x) . f(x) - lambda phi*(x)`
    pub fn eigen_residual(&self, field: &VectorField, x: &[f64]) -> f64 {
        dot(&self.evaluate_grad_phi(x), &field.eval(x)) - self.lambda * self.evaluate_phi(x)
    }
}

impl EigenfunctionLike for Eigenfunction {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate_phi(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.evaluate_grad_phi(x)
    }
}

/// An eigenfunction known in closed form, e.g. `x2 + 3*x1^2`.
#[derive(Debug, Clone)]
pub struct ClosedFormEigenfunction {
    lambda: f64,
    expr: ExprAST,
    grad: Vec<ExprAST>,
}

impl ClosedFormEigenfunction {
    pub fn new(lambda: f64, expr: ExprAST) -> Self {
        let grad = expr.gradient();
        ClosedFormEigenfunction { lambda, expr, grad }
    }

    pub fn parse(lambda: f64, text: &str, dim: usize) -> Result<Self> {
        Ok(Self::new(lambda, crate::expr::parse_expression(text, dim)?))
    }
}

impl EigenfunctionLike for ClosedFormEigenfunction {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.expr.eval(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }
}

/// One approximate eigenfunction per eigenvalue, in the linearization's order.
#[derive(Debug, Clone)]
pub struct EigenfunctionSet {
    items: Vec<Eigenfunction>,
}

impl EigenfunctionSet {
    pub fn new(items: Vec<Eigenfunction>) -> Result<Self> {
        let lambdas: Vec<f64> = items.iter().map(|e| e.lambda).collect();
        for (i, a) in lambdas.iter().enumerate() {
            if lambdas[i + 1..].contains(a) {
                return Err(Error::InvalidArgument(format!("eigenvalue {a} appears twice")));
            }
        }
        if let Some(first) = items.first() {
            if items.len() != first.w.len() {
                return Err(Error::Dimension { expected: first.w.len(), got: items.len() });
            }
        }
        Ok(EigenfunctionSet { items })
    }

    /// Solves the collocation problem for every mode of `lin` on a shared center set.
    pub fn approximate(
        kernel: KernelModel,
        field: &VectorField,
        lin: &Linearization,
        centers: &[Vec<f64>],
        regularization: Regularization,
        domain: &BoxDomain,
    ) -> Result<Self> {
        let items = (0..lin.dim())
            .map(|mode| {
                let problem = CollocationProblem::new(
                    kernel,
                    field.clone(),
                    lin.clone(),
                    mode,
                    centers.to_vec(),
                    regularization,
                    domain.clone(),
                )?;
                Ok(Eigenfunction::new(problem.solve()?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(items)
    }

    pub fn items(&self) -> &[Eigenfunction] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn into_items(self) -> Vec<Eigenfunction> {
        self.items
    }
}

const PATH_INTEGRAND_FLOOR: f64 = 1e-12;
const PATH_QUIET_STEPS: usize = 100;

/// Path-integral value `w^T x + int_0^inf e^{-lambda t} w^T G(s_t(x)) dt`.
///
/// The trajectory comes from fixed-step RK4 and the integral from the
/// trapezoidal rule on the same grid. Integration stops at `t_max` or once
/// the integrand has stayed below `1e-12` for 100 consecutive steps.
pub fn path_integral_phi(
    field: &VectorField,
    lin: &Linearization,
    lambda: f64,
    w: &[f64],
    x: &[f64],
    t_max: f64,
    dt: f64,
) -> Result<f64> {
    let d = field.dim();
    if x.len() != d || w.len() != d {
        return Err(Error::Dimension { expected: d, got: if x.len() != d { x.len() } else { w.len() } });
    }
    if !(t_max > 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("t_max and dt must be positive (got {t_max}, {dt})")));
    }
    let exponent = -lambda + 2.0 * lin.lambda_max();
    if !(exponent < 0.0) {
        return Err(Error::PathIntegralDivergent { exponent });
    }

    let integrand = |t: f64, state: &[f64]| (-lambda * t).exp() * dot(w, &nonlinear_part(field, lin, state));

    let steps = step_count(t_max, dt);
    let h = t_max / steps as f64;
    let mut rk = Rk4::new(field);
    let mut state = x.to_vec();
    let mut previous = integrand(0.0, &state);
    let mut integral = 0.0;
    let mut quiet = 0;
    for k in 1..=steps {
        rk.step(&mut state, h);
        let t = k as f64 * h;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: t });
        }
        let current = integrand(t, &state);
        integral += 0.5 * h * (previous + current);
        previous = current;
        if current.abs() < PATH_INTEGRAND_FLOOR {
            quiet += 1;
            if quiet >= PATH_QUIET_STEPS {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(dot(w, x) + integral)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
