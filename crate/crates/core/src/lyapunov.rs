//! Quadratic-form Lyapunov candidates `V*(x) = sum_ij P_ij phi*_i(x) phi*_j(x)`.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::VectorField;
use crate::koopman::{EigenfunctionLike, EigenfunctionSet};

/// Solves `Lambda^T P + P Lambda = -I` for diagonal `Lambda = diag(lambdas)`.
pub fn solve_p(lambdas: &[f64]) -> Result<Vec<Vec<f64>>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("no eigenvalues".into()));
    }
    if let Some(&bad) = lambdas.iter().find(|l| !(**l < 0.0)) {
        return Err(Error::NotHurwitz(bad));
    }
    let d = lambdas.len();
    Ok((0..d)
        .map(|i| (0..d).map(|j| if i == j { -1.0 / (2.0 * lambdas[i]) } else { 0.0 }).collect())
        .collect())
}

/// `||Lambda^T P + P Lambda + I||_inf` (max row sum) for diagonal `Lambda`.
pub fn lyapunov_residual(lambdas: &[f64], p: &[Vec<f64>]) -> f64 {
    let d = lambdas.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let identity = if i == j { 1.0 } else { 0.0 };
                    (lambdas[i] * p[i][j] + p[i][j] * lambdas[j] + identity).abs()
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `V*` built from `d` eigenfunctions and the diagonal Lyapunov matrix of their eigenvalues.
#[derive(Debug, Clone)]
pub struct LyapunovModel<E = crate::koopman::Eigenfunction> {
    eigenfunctions: Vec<E>,
    lambdas: Vec<f64>,
    p: Vec<Vec<f64>>,
}

impl LyapunovModel {
    pub fn from_set(set: EigenfunctionSet) -> Result<Self> {
        Self::new(set.into_items())
    }
}

impl<E: EigenfunctionLike> LyapunovModel<E> {
    pub fn new(eigenfunctions: Vec<E>) -> Result<Self> {
        let lambdas: Vec<f64> = eigenfunctions.iter().map(|e| e.lambda()).collect();
        let p = solve_p(&lambdas)?;
        Ok(LyapunovModel { eigenfunctions, lambdas, p })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn eigenfunctions(&self) -> &[E] {
        &self.eigenfunctions
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn p(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn residual(&self) -> f64 {
        lyapunov_residual(&self.lambdas, &self.p)
    }

    pub fn v_star(&self, x: &[f64]) -> f64 {
        let phi: Vec<f64> = self.eigenfunctions.iter().map(|e| e.value(x)).collect();
        self.quadratic_form(&phi)
    }

    fn quadratic_form(&self, phi: &[f64]) -> f64 {
        let mut v = 0.0;
        for (i, row) in self.p.iter().enumerate() {
            for (j, pij) in row.iter().enumerate() {
                if *pij != 0.0 {
                    v += pij * phi[i] * phi[j];
                }
            }
        }
        v
    }

    /// `grad V*(x) = sum_ij P_ij (phi_j grad phi_i + phi_i grad phi_j)`.
    pub fn grad_v_star(&self, x: &[f64]) -> Vec<f64> {
        let phi: Vec<f64> = self.eigenfunctions.iter().map(|e| e.value(x)).collect();
        let grads: Vec<Vec<f64>> = self.eigenfunctions.iter().map(|e| e.gradient(x)).collect();
        let mut g = vec![0.0; x.len()];
        for (i, row) in self.p.iter().enumerate() {
            for (j, pij) in row.iter().enumerate() {
                if *pij == 0.0 {
                    continue;
                }
                for (k, gk) in g.iter_mut().enumerate() {
                    *gk += pij * (phi[j] * grads[i][k] + phi[i] * grads[j][k]);
                }
            }
        }
        g
    }

    /// Orbital derivative `grad V*(x) . f(x)`.
    pub fn vdot_star(&self, field: &VectorField, x: &[f64]) -> f64 {
        let f = field.eval(x);
        self.grad_v_star(x).iter().zip(&f).map(|(a, b)| a * b).sum()
    }

    /// `sum_ij P_ij (lambda_i + lambda_j) phi_i phi_j`, the orbital derivative
    /// when the eigenfunctions are exact.
    pub fn vdot_eigen_identity(&self, x: &[f64]) -> f64 {
        let phi: Vec<f64> = self.eigenfunctions.iter().map(|e| e.value(x)).collect();
        let mut v = 0.0;
        for (i, row) in self.p.iter().enumerate() {
            for (j, pij) in row.iter().enumerate() {
                v += pij * (self.lambdas[i] + self.lambdas[j]) * phi[i] * phi[j];
            }
        }
        v
    }

    pub fn grid_eval(
        &self,
        field: &VectorField,
        domain: &BoxDomain,
        resolution: usize,
        quantity: Quantity,
    ) -> Result<SurfaceGrid> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!("grid resolution must be at least 2, got {resolution}")));
        }
        if domain.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: domain.dim() });
        }
        let points = domain.grid(resolution);
        let values = points
            .par_iter()
            .map(|x| match quantity {
                Quantity::V => self.v_star(x),
                Quantity::Vdot => self.vdot_star(field, x),
            })
            .collect();
        Ok(SurfaceGrid { domain: domain.clone(), resolution: vec![resolution; domain.dim()], quantity, points, values })
    }

    /// `sup |phi*_i|` over a uniform probe grid, for each eigenfunction.
    pub fn sup_norms(&self, domain: &BoxDomain, probe_resolution: usize) -> Vec<f64> {
        let points = domain.grid(probe_resolution.max(2));
        self.eigenfunctions
            .iter()
            .map(|e| points.par_iter().map(|x| e.value(x).abs()).reduce(|| 0.0, f64::max))
            .collect()
    }

    pub fn diagnostics(&self, fill_distance: f64, domain: &BoxDomain, probe_resolution: usize) -> Diagnostics {
        let lambda_bar = self.lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let alpha = self.lambdas.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
        let p_frobenius = self.p.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let m_constant = 1.0;
        Diagnostics {
            fill_distance,
            lambda_bar,
            alpha,
            p_frobenius,
            m_constant,
            p_bound: m_constant * m_constant / (2.0 * alpha),
            lyapunov_residual: self.residual(),
            phi_sup_norms: self.sup_norms(domain, probe_resolution),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    V,
    Vdot,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::V => "V",
            Quantity::Vdot => "Vdot",
        }
    }
}

/// Samples of `V*` or its orbital derivative on a uniform grid, first
/// coordinate varying fastest.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    domain: BoxDomain,
    resolution: Vec<usize>,
    quantity: Quantity,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl SurfaceGrid {
    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let bounds: Vec<String> = self
            .domain
            .lower()
            .iter()
            .zip(self.domain.upper())
            .flat_map(|(a, b)| [a.to_string(), b.to_string()])
            .collect();
        let res: Vec<String> = self.resolution.iter().map(|r| r.to_string()).collect();
        writeln!(out, "# domain {}; resolution {}; quantity {}", bounds.join(" "), res.join(" "), self.quantity.name())?;
        for (x, v) in self.points.iter().zip(&self.values) {
            for c in x {
                write!(out, "{c},")?;
            }
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub fill_distance: f64,
    pub lambda_bar: f64,
    pub alpha: f64,
    pub p_frobenius: f64,
    pub m_constant: f64,
    pub p_bound: f64,
    pub lyapunov_residual: f64,
    pub phi_sup_norms: Vec<f64>,
}

impl Diagnostics {
    pub fn p_bound_holds(&self) -> bool {
        self.p_frobenius <= self.p_bound
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fill_distance = {}", self.fill_distance)?;
        writeln!(f, "lambda_bar = {}", self.lambda_bar)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "lyapunov_residual = {:e}", self.lyapunov_residual)?;
        writeln!(f, "P_frobenius = {}", self.p_frobenius)?;
        writeln!(f, "P_bound (M = {}) = {}", self.m_constant, self.p_bound)?;
        if !self.p_bound_holds() {
            writeln!(f, "note: ||P||_F exceeds M^2/(2 alpha) with M = {}", self.m_constant)?;
        }
        for (i, s) in self.phi_sup_norms.iter().enumerate() {
            writeln!(f, "sup|phi_{}| = {}", i + 1, s)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koopman::ClosedFormEigenfunction;

    fn exact_example_one() -> (VectorField, LyapunovModel<ClosedFormEigenfunction>) {
        let f = VectorField::parse(&["-2*x1", "-3*(x2 - x1^2)"]).unwrap();
        let model = LyapunovModel::new(vec![
            ClosedFormEigenfunction::parse(-2.0, "x1", 2).unwrap(),
            ClosedFormEigenfunction::parse(-3.0, "x2 + 3*x1^2", 2).unwrap(),
        ])
        .unwrap();
        (f, model)
    }

    #[test]
    fn closed_form_p() {
        let p = solve_p(&[-2.0, -3.0]).unwrap();
        assert_eq!(p, vec![vec![0.25, 0.0], vec![0.0, 1.0 / 6.0]]);
        assert_eq!(solve_p(&[-0.5]).unwrap(), vec![vec![1.0]]);
        assert!(lyapunov_residual(&[-2.0, -3.0], &p) <= 1e-15);
        assert!(matches!(solve_p(&[-1.0, 0.0]), Err(Error::NotHurwitz(_))));
    }

    #[test]
    fn exact_values_at_one_zero() {
        let (f, model) = exact_example_one();
        assert!((model.v_star(&[1.0, 0.0]) - 1.75).abs() <= 1e-12);
        assert!((model.vdot_star(&f, &[1.0, 0.0]) + 10.0).abs() <= 1e-12);
        assert_eq!(model.v_star(&[0.0, 0.0]), 0.0);
        assert_eq!(model.vdot_star(&f, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn chain_rule_matches_eigen_identity_for_exact_functions() {
        let (f, model) = exact_example_one();
        for x in [[0.3, -1.2], [1.7, 0.4], [-2.0, 2.0]] {
            let a = model.vdot_star(&f, &x);
            let b = model.vdot_eigen_identity(&x);
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} {b}");
        }
    }

    #[test]
    fn diagnostics_report_both_p_quantities() {
        let (_, model) = exact_example_one();
        let domain = BoxDomain::symmetric(1.0, 2).unwrap();
        let diag = model.diagnostics(0.1, &domain, 11);
        assert_eq!(diag.alpha, 2.0);
        assert_eq!(diag.lambda_bar, -2.0);
        assert_eq!(diag.p_bound, 0.25);
        assert!((diag.p_frobenius - (1.0f64 / 16.0 + 1.0 / 36.0).sqrt()).abs() < 1e-15);
        assert!(!diag.p_bound_holds());
        assert!(diag.to_string().contains("exceeds"));
        assert_eq!(diag.phi_sup_norms, vec![1.0, 4.0]);

        let one = LyapunovModel::new(vec![ClosedFormEigenfunction::parse(-1.0, "x1", 1).unwrap()]).unwrap();
        let diag = one.diagnostics(0.0, &BoxDomain::symmetric(1.0, 1).unwrap(), 3);
        assert_eq!(diag.p_frobenius, diag.p_bound);
    }

    #[test]
    fn grid_eval_and_csv() {
        let (f, model) = exact_example_one();
        let domain = BoxDomain::symmetric(1.0, 2).unwrap();
        let grid = model.grid_eval(&f, &domain, 2, Quantity::V).unwrap();
        assert_eq!(grid.values().len(), 4);
        assert!(grid.values().iter().all(|v| *v >= 0.0));
        let grid = model.grid_eval(&f, &domain, 3, Quantity::V).unwrap();
        assert_eq!(grid.values()[4], 0.0);
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# domain -1 1 -1 1; resolution 3 3; quantity V");
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(&first[..2], &[-1.0, -1.0]);
        assert!((first[2] - (0.25 + 4.0 / 6.0)).abs() < 1e-15);
        assert_eq!(text.lines().count(), 10);
        assert!(model.grid_eval(&f, &domain, 1, Quantity::Vdot).is_err());
    }
}
