//! Symmetric kernel collocation for the nonlinear part of a principal
//! eigenfunction.
//!
//! For an eigenpair `(lambda, w)` of the linearization, the nonlinear part `h`
//! solves the first-order PDE
//!
//! ```text
//! grad h(x) . f(x) - lambda h(x) = -w^T G(x),    h(0) = 0,   grad h(0) = 0.
//! ```
//!
//! We look for the minimum-norm element of the kernel's native space that
//! satisfies the PDE at the centers `x_1..x_n` and the value and gradient
//! conditions at the origin. By the representer theorem the minimizer is a
//! combination of the Riesz representers of those `n + 1 + d` functionals, and
//! the coefficients solve a symmetric Gram system.

use faer::Mat;
use rayon::prelude::*;

use crate::domain::BoxDomain;
use crate::dynamics::{nonlinear_part, Linearization};
use crate::error::{Error, Result};
use crate::expr::VectorField;
use crate::kernel::{KernelModel, PointFunctional};
use crate::solve::{solve_symmetric, SolveMethod};

/// Ridge added to the Gram matrix before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    None,
    /// `A + eta I` with a fixed `eta`.
    Absolute(f64),
    /// `A + c * trace(A) / m * I`.
    RelativeToTrace(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::RelativeToTrace(1e-10)
    }
}

impl Regularization {
    fn eta(&self, trace: f64, m: usize) -> f64 {
        match *self {
            Regularization::None => 0.0,
            Regularization::Absolute(eta) => eta,
            Regularization::RelativeToTrace(c) => c * trace / m as f64,
        }
    }
}

const DISTINCT_TOLERANCE: f64 = 1e-12;
const CONDITION_WARNING: f64 = 1e12;

/// One collocation problem: a kernel, a field, an eigenpair and a set of centers.
#[derive(Debug, Clone)]
pub struct CollocationProblem {
    kernel: KernelModel,
    field: VectorField,
    lin: Linearization,
    mode: usize,
    centers: Vec<Vec<f64>>,
    regularization: Regularization,
    domain: BoxDomain,
    // n PDE functionals, then the value at 0, then d partials at 0
    functionals: Vec<PointFunctional>,
    rhs: Vec<f64>,
}

impl CollocationProblem {
    /// Sets up the problem for eigenvalue `lin.eigenvalues()[mode]`.
    ///
    /// Centers must be pairwise distinct, lie inside `domain` and avoid the
    /// origin (which carries its own constraints).
    pub fn new(
        kernel: KernelModel,
        field: VectorField,
        lin: Linearization,
        mode: usize,
        centers: Vec<Vec<f64>>,
        regularization: Regularization,
        domain: BoxDomain,
    ) -> Result<Self> {
        let d = field.dim();
        if lin.dim() != d || domain.dim() != d {
            return Err(Error::Dimension { expected: d, got: if lin.dim() != d { lin.dim() } else { domain.dim() } });
        }
        if mode >= d {
            return Err(Error::InvalidProblem(format!("mode {mode} out of range for dimension {d}")));
        }
        if let Regularization::Absolute(eta) | Regularization::RelativeToTrace(eta) = regularization {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::InvalidProblem(format!("regularization must be non-negative, got {eta}")));
            }
        }
        for (j, c) in centers.iter().enumerate() {
            if c.len() != d {
                return Err(Error::Dimension { expected: d, got: c.len() });
            }
            if !domain.contains(c) {
                return Err(Error::InvalidProblem(format!("center {j} = {c:?} lies outside the domain")));
            }
            if norm(c) <= DISTINCT_TOLERANCE {
                return Err(Error::InvalidProblem(format!("center {j} coincides with the origin")));
            }
        }
        if let Some((a, b)) = closest_pair(&centers) {
            return Err(Error::InvalidProblem(format!("centers {a} and {b} are not distinct")));
        }

        let lambda = lin.eigenvalues()[mode];
        let w = lin.left_eigenvectors()[mode].clone();
        let mut functionals = Vec::with_capacity(centers.len() + 1 + d);
        let mut rhs = Vec::with_capacity(centers.len() + 1 + d);
        for c in &centers {
            let g = nonlinear_part(&field, &lin, c);
            rhs.push(-dot(&w, &g));
            functionals.push(PointFunctional { point: c.clone(), grad_coeff: field.eval(c), value_coeff: -lambda });
        }
        functionals.push(PointFunctional { point: vec![0.0; d], grad_coeff: vec![0.0; d], value_coeff: 1.0 });
        rhs.push(0.0);
        for l in 0..d {
            let mut e = vec![0.0; d];
            e[l] = 1.0;
            functionals.push(PointFunctional { point: vec![0.0; d], grad_coeff: e, value_coeff: 0.0 });
            rhs.push(0.0);
        }

        Ok(CollocationProblem { kernel, field, lin, mode, centers, regularization, domain, functionals, rhs })
    }

    pub fn kernel(&self) -> &KernelModel {
        &self.kernel
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn linearization(&self) -> &Linearization {
        &self.lin
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn lambda(&self) -> f64 {
        self.lin.eigenvalues()[self.mode]
    }

    pub fn w(&self) -> &[f64] {
        &self.lin.left_eigenvectors()[self.mode]
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn regularization(&self) -> Regularization {
        self.regularization
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// `n + 1 + d`
    pub fn size(&self) -> usize {
        self.functionals.len()
    }

    /// Right-hand side `(-w^T G(x_1), ..., -w^T G(x_n), 0, ..., 0)`.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Riesz representer of the PDE functional at center `j`, evaluated at `x`:
    /// `grad_y k(x, x_j) . f(x_j) - lambda k(x, x_j)`.
    pub fn k_pde(&self, x: &[f64], j: usize) -> f64 {
        self.kernel.apply_right(x, &self.functionals[j])
    }

    /// Unregularized Gram matrix `A[a][b] = L_a^x L_b^y k`, symmetric by construction.
    pub fn gram(&self) -> Mat<f64> {
        let m = self.size();
        let upper: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|a| (a..m).map(|b| self.kernel.apply_pair(&self.functionals[a], &self.functionals[b])).collect())
            .collect();
        let mut gram = Mat::zeros(m, m);
        for (a, row) in upper.iter().enumerate() {
            for (offset, &v) in row.iter().enumerate() {
                gram[(a, a + offset)] = v;
                gram[(a + offset, a)] = v;
            }
        }
        gram
    }

    /// Gram matrix with the ridge applied to the PDE rows, the right-hand
    /// side, and the ridge used. The origin rows stay exact so that
    /// `h*(0) = 0` and `grad h*(0) = 0` are imposed as hard constraints.
    pub fn assemble_system(&self) -> (Mat<f64>, Vec<f64>, f64) {
        let mut a = self.gram();
        let m = self.size();
        let trace: f64 = (0..m).map(|i| a[(i, i)]).sum();
        let eta = self.regularization.eta(trace, m);
        if eta > 0.0 {
            for i in 0..self.centers.len() {
                a[(i, i)] += eta;
            }
        }
        (a, self.rhs.clone(), eta)
    }

    pub fn solve(self) -> Result<CollocationSolution> {
        let (a, b, eta) = self.assemble_system();
        let outcome = solve_symmetric(&a, &b)?;
        if outcome.condition_estimate > CONDITION_WARNING {
            log::warn!(
                "collocation system for lambda = {} is ill-conditioned (estimate {:.3e})",
                self.lambda(),
                outcome.condition_estimate
            );
        }
        Ok(CollocationSolution {
            alpha: outcome.x,
            problem: self,
            condition_estimate: outcome.condition_estimate,
            method: outcome.method,
            eta,
        })
    }
}

/// Coefficients of the representer expansion of `h*`, ordered like the functionals.
#[derive(Debug, Clone)]
pub struct CollocationSolution {
    alpha: Vec<f64>,
    problem: CollocationProblem,
    condition_estimate: f64,
    method: SolveMethod,
    eta: f64,
}

impl CollocationSolution {
    /// Rebuilds a solution from stored coefficients, e.g. read back from disk.
    pub fn from_coefficients(problem: CollocationProblem, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != problem.size() {
            return Err(Error::Dimension { expected: problem.size(), got: alpha.len() });
        }
        Ok(CollocationSolution {
            alpha,
            problem,
            condition_estimate: f64::NAN,
            method: SolveMethod::SymmetricIndefinite,
            eta: f64::NAN,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn problem(&self) -> &CollocationProblem {
        &self.problem
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    /// Ridge used in the solve; NaN for solutions rebuilt from coefficients.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `h*(x) = sum_j alpha_j k_PDE(x, x_j) + alpha_{n+1} k(x, 0) + sum_l alpha_{n+1+l} d_{y_l} k(x, 0)`
    pub fn evaluate_h(&self, x: &[f64]) -> f64 {
        let kernel = &self.problem.kernel;
        self.alpha
            .iter()
            .zip(&self.problem.functionals)
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, func)| a * kernel.apply_right(x, func))
            .sum()
    }

    pub fn evaluate_grad_h(&self, x: &[f64]) -> Vec<f64> {
        let kernel = &self.problem.kernel;
        let mut grad = vec![0.0; x.len()];
        for (a, func) in self.alpha.iter().zip(&self.problem.functionals) {
            if *a != 0.0 {
                kernel.apply_right_grad_acc(x, func, *a, &mut grad);
            }
        }
        grad
    }

    /// `grad h*(x) . f(x) - lambda h*(x) + w^T G(x)`; zero where the PDE holds.
    pub fn pde_residual(&self, x: &[f64]) -> f64 {
        let p = &self.problem;
        let fx = p.field.eval(x);
        let g = nonlinear_part(&p.field, &p.lin, x);
        dot(&self.evaluate_grad_h(x), &fx) - p.lambda() * self.evaluate_h(x) + dot(p.w(), &g)
    }

    /// Each constraint functional applied to `h*`, in system order.
    pub fn constraint_values(&self) -> Vec<f64> {
        self.problem
            .functionals
            .par_iter()
            .map(|func| dot(&func.grad_coeff, &self.evaluate_grad_h(&func.point)) + func.value_coeff * self.evaluate_h(&func.point))
            .collect()
    }
}

/// Uniform `n^d` grid over `domain`, endpoints included. A grid point that
/// lands on the origin is shifted by half a cell diagonal.
pub fn grid_centers(domain: &BoxDomain, n: usize) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("center grid needs at least 2 points per axis, got {n}")));
    }
    let half_cell: Vec<f64> =
        domain.lower().iter().zip(domain.upper()).map(|(a, b)| 0.5 * (b - a) / (n - 1) as f64).collect();
    Ok(domain
        .grid(n)
        .into_iter()
        .map(|p| {
            if norm(&p) <= DISTINCT_TOLERANCE {
                half_cell.clone()
            } else {
                p
            }
        })
        .collect())
}

/// Largest nearest-center distance over a `probe_resolution^d` probe grid.
///
/// This is a lower bound on the true fill distance `sup_x min_z |x - z|`
/// that converges as the probe grid is refined.
pub fn fill_distance(centers: &[Vec<f64>], domain: &BoxDomain, probe_resolution: usize) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("fill distance of an empty set".into()));
    }
    if probe_resolution < 2 {
        return Err(Error::InvalidArgument(format!("probe resolution must be at least 2, got {probe_resolution}")));
    }
    let probes = domain.grid(probe_resolution);
    Ok(probes
        .par_iter()
        .map(|p| {
            centers
                .iter()
                .map(|c| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt())
}

pub const DEFAULT_FILL_PROBE_RESOLUTION: usize = 201;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// First pair of centers closer than the distinctness tolerance, if any.
fn closest_pair(centers: &[Vec<f64>]) -> Option<(usize, usize)> {
    if centers.len() < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| centers[a][0].total_cmp(&centers[b][0]));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if centers[b][0] - centers[a][0] > DISTINCT_TOLERANCE {
                break;
            }
            let dist = centers[a].iter().zip(&centers[b]).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            if dist <= DISTINCT_TOLERANCE {
                return Some((a.min(b), a.max(b)));
            }
        }
    }
    None
}
