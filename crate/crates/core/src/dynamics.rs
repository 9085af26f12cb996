//! Linearization at the origin and fixed-step flow integration.

use faer::Mat;

use crate::error::{Error, Result};
use crate::expr::VectorField;

/// Jacobian `E = Df(0)` with its (real, simple) spectrum and unit left eigenvectors.
#[derive(Debug, Clone)]
pub struct Linearization {
    jacobian: Mat<f64>,
    eigenvalues: Vec<f64>,
    left_eigenvectors: Vec<Vec<f64>>,
}

impl Linearization {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn jacobian(&self) -> &Mat<f64> {
        &self.jacobian
    }

    /// Sorted in descending order, so `eigenvalues()[0]` is the slowest mode.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn left_eigenvectors(&self) -> &[Vec<f64>] {
        &self.left_eigenvectors
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `E x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|r| (0..d).map(|c| self.jacobian[(r, c)] * x[c]).sum()).collect()
    }

    /// Max-abs entry of the Jacobian.
    pub fn jacobian_norm(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                m = m.max(self.jacobian[(r, c)].abs());
            }
        }
        m
    }

    /// `max_i || w_i^T E - lambda_i w_i^T ||_inf`
    pub fn eigen_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for (lambda, w) in self.eigenvalues.iter().zip(&self.left_eigenvectors) {
            for c in 0..d {
                let wte: f64 = (0..d).map(|r| w[r] * self.jacobian[(r, c)]).sum();
                worst = worst.max((wte - lambda * w[c]).abs());
            }
        }
        worst
    }
}

/// Linearizes `field` at the origin using its symbolic Jacobian.
///
/// Fails unless the origin is an equilibrium and `Df(0)` has real, simple,
/// strictly negative eigenvalues.
pub fn linearize(field: &VectorField) -> Result<Linearization> {
    let d = field.dim();
    let origin = vec![0.0; d];
    let residual = field.eval(&origin).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(residual <= 1e-12) {
        return Err(Error::OriginNotEquilibrium { residual });
    }

    let entries = field.jacobian_at(&origin);
    let jacobian = Mat::from_fn(d, d, |r, c| entries[r][c]);
    let scale = entries.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));

    let spectrum = jacobian.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let mut eigenvalues = Vec::with_capacity(d);
    for z in &spectrum {
        if z.im.abs() > 1e-10 * scale {
            return Err(Error::ComplexEigenvalue { re: z.re, im: z.im });
        }
        eigenvalues.push(z.re);
    }
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    for pair in eigenvalues.windows(2) {
        if (pair[0] - pair[1]).abs() <= 1e-8 * scale {
            return Err(Error::RepeatedEigenvalue(pair[0]));
        }
    }
    if let Some(&bad) = eigenvalues.iter().find(|&&l| l >= 0.0) {
        return Err(Error::NotHurwitz(bad));
    }

    let left_eigenvectors = eigenvalues
        .iter()
        .map(|&lambda| left_eigenvector(&jacobian, lambda))
        .collect::<Result<Vec<_>>>()?;

    Ok(Linearization { jacobian, eigenvalues, left_eigenvectors })
}

// Right null vector of E^T - lambda I, i.e. the right singular vector of the
// smallest singular value. Normalized to unit length with its largest-magnitude
// entry positive.
fn left_eigenvector(jacobian: &Mat<f64>, lambda: f64) -> Result<Vec<f64>> {
    let d = jacobian.nrows();
    let shifted = Mat::from_fn(d, d, |r, c| jacobian[(c, r)] - if r == c { lambda } else { 0.0 });
    let svd = shifted.svd().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let k = (0..d).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(0);
    let v = svd.V();
    let mut w: Vec<f64> = (0..d).map(|r| v[(r, k)]).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let pivot = w.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    let scale = pivot.signum() / norm;
    for x in &mut w {
        *x *= scale;
    }
    Ok(w)
}

/// `G(x) = f(x) - E x`, the purely nonlinear part of the field.
pub fn nonlinear_part(field: &VectorField, lin: &Linearization, x: &[f64]) -> Vec<f64> {
    let fx = field.eval(x);
    let ex = lin.apply(x);
    fx.iter().zip(&ex).map(|(f, e)| f - e).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Classical fourth-order Runge-Kutta stepper with reusable scratch space.
pub(crate) struct Rk4<'a> {
    field: &'a VectorField,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    pub(crate) fn new(field: &'a VectorField) -> Self {
        let d = field.dim();
        Rk4 { field, k: std::array::from_fn(|_| vec![0.0; d]), tmp: vec![0.0; d] }
    }

    pub(crate) fn step(&mut self, x: &mut [f64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        self.field.eval_into(x, k1);
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
            *t = xi + 0.5 * dt * ki;
        }
        self.field.eval_into(&self.tmp, k2);
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
            *t = xi + 0.5 * dt * ki;
        }
        self.field.eval_into(&self.tmp, k3);
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
            *t = xi + dt * ki;
        }
        self.field.eval_into(&self.tmp, k4);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Number of RK4 steps used to reach `t_end`; the step is shrunk so the grid lands on `t_end`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> usize {
    ((t_end / dt).round() as usize).max(1)
}

/// Integrates `x' = f(x)` from `x0` over `[0, t_end]` with fixed-step RK4.
pub fn integrate_flow(field: &VectorField, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    if x0.len() != field.dim() {
        return Err(Error::Dimension { expected: field.dim(), got: x0.len() });
    }
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end and dt must be positive (got {t_end}, {dt})")));
    }
    let steps = step_count(t_end, dt);
    let h = t_end / steps as f64;
    let mut rk = Rk4::new(field);
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x.clone());
    for k in 1..=steps {
        rk.step(&mut x, h);
        let t = if k == steps { t_end } else { k as f64 * h };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: t });
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}
