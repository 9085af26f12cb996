//! Continuous piecewise affine (CPA) verification of a Lyapunov candidate on a
//! regular triangulation of a planar box.
//!
//! Given vertex values `V_x`, the candidate is certified when
//!
//! ```text
//! (LC1x)  V_0 = 0 and V_x > 0 at every other vertex,
//! (LC2x)  grad V_nu . f(x_i) + |grad V_nu|_1 E_{nu,i} < 0
//! ```
//!
//! for every simplex `nu` and each of its vertices `x_i` other than the origin.
//! `grad V_nu` is the gradient of the affine interpolant on `nu` and
//! `E_{nu,i}` bounds the interpolation error of `f` through the second
//! derivative bound `B`.

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::VectorField;

/// Two triangles per cell of an `N x N` grid, each cell split along its
/// bottom-left to top-right diagonal.
#[derive(Debug, Clone)]
pub struct Triangulation {
    domain: BoxDomain,
    cells: usize,
    vertices: Vec<[f64; 2]>,
    simplices: Vec<[usize; 3]>,
    origin: Option<usize>,
}

/// Builds the regular triangulation of a 2D box with `n` cells per axis.
///
/// Vertices are numbered with the first coordinate varying fastest. Cell
/// `(i, j)` owns simplices `2 (i + j n)` (below the diagonal) and
/// `2 (i + j n) + 1` (above it). The first vertex of each simplex is its
/// bottom-left corner, or the origin when the simplex contains it.
pub fn build_triangulation(domain: &BoxDomain, n: usize) -> Result<Triangulation> {
    if domain.dim() != 2 {
        return Err(Error::Triangulation(format!("only planar boxes are supported, got dimension {}", domain.dim())));
    }
    if n < 2 {
        return Err(Error::Triangulation(format!("need at least 2 cells per axis, got {n}")));
    }
    let axes: Vec<Vec<f64>> = (0..2)
        .map(|axis| {
            let mut s = domain.axis_samples(axis, n + 1);
            let width = domain.upper()[axis] - domain.lower()[axis];
            for v in s.iter_mut() {
                if v.abs() <= 1e-12 * width {
                    *v = 0.0;
                }
            }
            s
        })
        .collect();
    let origin_strictly_inside =
        (0..2).all(|a| domain.lower()[a] < 0.0 && 0.0 < domain.upper()[a]);
    let mut origin = None;
    if let (Some(i), Some(j)) = (axes[0].iter().position(|v| *v == 0.0), axes[1].iter().position(|v| *v == 0.0)) {
        origin = Some(i + j * (n + 1));
    }
    if origin.is_none() && origin_strictly_inside {
        let hint = if n % 2 == 1 { "N must be even" } else { "choose N so that 0 lies on both axis grids" };
        return Err(Error::Triangulation(format!("the origin is not a vertex with N = {n}; {hint}")));
    }

    let stride = n + 1;
    let mut vertices = Vec::with_capacity(stride * stride);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([axes[0][i], axes[1][j]]);
        }
    }
    let mut simplices = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = i + j * stride;
            let v10 = v00 + 1;
            let v01 = v00 + stride;
            let v11 = v01 + 1;
            for mut s in [[v00, v10, v11], [v00, v11, v01]] {
                if let Some(o) = origin {
                    if let Some(k) = s.iter().position(|v| *v == o) {
                        s.rotate_left(k);
                    }
                }
                simplices.push(s);
            }
        }
    }
    Ok(Triangulation { domain: domain.clone(), cells: n, vertices, simplices, origin })
}

impl Triangulation {
    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn simplices(&self) -> &[[usize; 3]] {
        &self.simplices
    }

    pub fn origin_index(&self) -> Option<usize> {
        self.origin
    }

    pub fn cell_size(&self) -> [f64; 2] {
        let n = self.cells as f64;
        [
            (self.domain.upper()[0] - self.domain.lower()[0]) / n,
            (self.domain.upper()[1] - self.domain.lower()[1]) / n,
        ]
    }

    /// Index of a simplex containing `x`, or `None` outside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if !self.domain.contains(x) {
            return None;
        }
        let h = self.cell_size();
        let lo = self.domain.lower();
        let u = (x[0] - lo[0]) / h[0];
        let v = (x[1] - lo[1]) / h[1];
        let i = (u.floor() as usize).min(self.cells - 1);
        let j = (v.floor() as usize).min(self.cells - 1);
        let above = (v - j as f64) > (u - i as f64);
        Some(2 * (i + j * self.cells) + above as usize)
    }

    /// Value at `x` of the piecewise affine interpolant of `values`.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        let nu = self.locate(x)?;
        let s = self.simplices[nu];
        let g = simplex_gradient(self, nu, values).ok()?;
        let x0 = self.vertices[s[0]];
        Some(values[s[0]] + g[0] * (x[0] - x0[0]) + g[1] * (x[1] - x0[1]))
    }
}

/// Gradient of the affine function through the vertex values of simplex `nu`.
pub fn simplex_gradient(tri: &Triangulation, nu: usize, values: &[f64]) -> Result<[f64; 2]> {
    let [i0, i1, i2] = tri.simplices[nu];
    let x0 = tri.vertices[i0];
    let a = [
        [tri.vertices[i1][0] - x0[0], tri.vertices[i1][1] - x0[1]],
        [tri.vertices[i2][0] - x0[0], tri.vertices[i2][1] - x0[1]],
    ];
    let rhs = [values[i1] - values[i0], values[i2] - values[i0]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = (a[0][0].abs() + a[0][1].abs()) * (a[1][0].abs() + a[1][1].abs());
    if !(det.abs() > 1e-14 * scale) {
        return Err(Error::Triangulation(format!("simplex {nu} is degenerate")));
    }
    Ok([(rhs[0] * a[1][1] - rhs[1] * a[0][1]) / det, (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det])
}

/// Entrywise bound `B_rs >= |d^2 f_j / dx_r dx_s|`, shared by every simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct BBound {
    b: Vec<Vec<f64>>,
}

impl BBound {
    pub fn new(b: Vec<Vec<f64>>) -> Result<Self> {
        let d = b.len();
        if d == 0 || b.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidArgument("B must be a non-empty square matrix".into()));
        }
        if b.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("B entries must be finite and non-negative".into()));
        }
        Ok(BBound { b })
    }

    pub fn zeros(d: usize) -> Self {
        BBound { b: vec![vec![0.0; d]; d] }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.b[r][s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.b
    }
}

pub const DEFAULT_B_SAFETY: f64 = 1.1;

/// Bounds the second partials of `field` over `domain`.
///
/// Entries whose second partials are constant for every component are exact.
/// The others are the maximum over a `probe_resolution`-per-axis grid scaled by
/// `safety`. An `override_b` is checked against the probe and returned as is.
pub fn estimate_b(
    field: &VectorField,
    domain: &BoxDomain,
    probe_resolution: usize,
    safety: f64,
    override_b: Option<BBound>,
) -> Result<BBound> {
    let d = field.dim();
    if domain.dim() != d {
        return Err(Error::Dimension { expected: d, got: domain.dim() });
    }
    if !(safety >= 1.0) {
        return Err(Error::InvalidArgument(format!("B safety factor must be at least 1, got {safety}")));
    }
    if probe_resolution < 2 {
        return Err(Error::InvalidArgument(format!("probe resolution must be at least 2, got {probe_resolution}")));
    }
    let probe = domain.grid(probe_resolution);
    let mut exact = vec![vec![true; d]; d];
    let mut observed = vec![vec![0.0f64; d]; d];
    for r in 0..d {
        for s in 0..d {
            for j in 0..d {
                let second = field.jacobian_exprs()[j][r].differentiate(s);
                match second.as_constant() {
                    Some(c) => observed[r][s] = observed[r][s].max(c.abs()),
                    None => {
                        exact[r][s] = false;
                        let m = probe.par_iter().map(|x| second.eval(x).abs()).reduce(|| 0.0, f64::max);
                        observed[r][s] = observed[r][s].max(m);
                    }
                }
            }
        }
    }

    if let Some(b) = override_b {
        if b.dim() != d {
            return Err(Error::Dimension { expected: d, got: b.dim() });
        }
        for r in 0..d {
            for s in 0..d {
                let required = observed[r][s];
                if b.get(r, s) < required * (1.0 - 1e-12) {
                    return Err(Error::BBoundTooSmall { row: r, col: s, given: b.get(r, s), required });
                }
            }
        }
        return Ok(b);
    }
    let b = (0..d)
        .map(|r| (0..d).map(|s| if exact[r][s] { observed[r][s] } else { observed[r][s] * safety }).collect())
        .collect();
    BBound::new(b)
}

/// `E_{nu,i} = 1/2 sum_{r,s} B_rs |[x_i - x_0]_r| (|[x_i - x_0]_s| + |[x_i - x_0]_d|)`
/// with `d` the last coordinate.
pub fn compute_e(tri: &Triangulation, nu: usize, i: usize, b: &BBound) -> f64 {
    let s = tri.simplices[nu];
    let x0 = tri.vertices[s[0]];
    let xi = tri.vertices[s[i]];
    let diff = [(xi[0] - x0[0]).abs(), (xi[1] - x0[1]).abs()];
    curvature_term(&diff, b)
}

fn curvature_term(abs_diff: &[f64], b: &BBound) -> f64 {
    let last = abs_diff[abs_diff.len() - 1];
    let mut e = 0.0;
    for (r, dr) in abs_diff.iter().enumerate() {
        for (s, ds) in abs_diff.iter().enumerate() {
            e += b.get(r, s) * dr * (ds + last);
        }
    }
    0.5 * e
}

/// Tolerance on `|V_0|` at the origin vertex.
pub const ORIGIN_VALUE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexCheck {
    pub vertex: usize,
    pub value: f64,
    /// Negative when the constraint holds: `-V` away from the origin, `|V| - tol` at it.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexCheck {
    pub simplex: usize,
    /// Position within the simplex, 0 being `x_0`.
    pub local: usize,
    pub vertex: usize,
    /// `grad V_nu . f(x_i) + |grad V_nu|_1 E_{nu,i}`; the constraint holds when negative.
    pub lhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CertificationReport {
    vertex_results: Vec<VertexCheck>,
    simplex_results: Vec<SimplexCheck>,
    failure_radius: f64,
    vertices: Vec<[f64; 2]>,
    simplex_count: usize,
}

/// Checks (LC1x) at every vertex and (LC2x) at every simplex vertex other than the origin.
pub fn certify(tri: &Triangulation, values: &[f64], field: &VectorField, b: &BBound) -> Result<CertificationReport> {
    if values.len() != tri.vertices.len() {
        return Err(Error::Dimension { expected: tri.vertices.len(), got: values.len() });
    }
    if field.dim() != 2 || b.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: if field.dim() != 2 { field.dim() } else { b.dim() } });
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("vertex value {k} is not finite")));
    }

    let vertex_results: Vec<VertexCheck> = values
        .iter()
        .enumerate()
        .map(|(k, &value)| {
            let margin = if Some(k) == tri.origin { value.abs() - ORIGIN_VALUE_TOLERANCE } else { -value };
            let pass = if Some(k) == tri.origin { margin <= 0.0 } else { margin < 0.0 };
            VertexCheck { vertex: k, value, margin, pass }
        })
        .collect();

    let flow: Vec<[f64; 2]> = tri
        .vertices
        .par_iter()
        .map(|x| {
            let f = field.eval(x);
            [f[0], f[1]]
        })
        .collect();

    let per_simplex: Vec<Vec<SimplexCheck>> = (0..tri.simplices.len())
        .into_par_iter()
        .map(|nu| {
            let s = tri.simplices[nu];
            let g = simplex_gradient(tri, nu, values)?;
            let g_l1 = g[0].abs() + g[1].abs();
            let x0 = tri.vertices[s[0]];
            Ok(s.iter()
                .enumerate()
                .filter(|(_, v)| Some(**v) != tri.origin)
                .map(|(local, &v)| {
                    let xi = tri.vertices[v];
                    let e = curvature_term(&[(xi[0] - x0[0]).abs(), (xi[1] - x0[1]).abs()], b);
                    let lhs = g[0] * flow[v][0] + g[1] * flow[v][1] + g_l1 * e;
                    SimplexCheck { simplex: nu, local, vertex: v, lhs, pass: lhs < 0.0 }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let simplex_results: Vec<SimplexCheck> = per_simplex.into_iter().flatten().collect();

    let norm = |k: usize| tri.vertices[k][0].hypot(tri.vertices[k][1]);
    let failure_radius = vertex_results
        .iter()
        .filter(|c| !c.pass)
        .map(|c| norm(c.vertex))
        .chain(simplex_results.iter().filter(|c| !c.pass).map(|c| norm(c.vertex)))
        .fold(0.0, f64::max);

    Ok(CertificationReport {
        vertex_results,
        simplex_results,
        failure_radius,
        vertices: tri.vertices.clone(),
        simplex_count: tri.simplices.len(),
    })
}

impl CertificationReport {
    pub fn vertex_results(&self) -> &[VertexCheck] {
        &self.vertex_results
    }

    pub fn simplex_results(&self) -> &[SimplexCheck] {
        &self.simplex_results
    }

    pub fn failure_radius(&self) -> f64 {
        self.failure_radius
    }

    pub fn lc1_failures(&self) -> usize {
        self.vertex_results.iter().filter(|c| !c.pass).count()
    }

    pub fn lc2_failures(&self) -> usize {
        self.simplex_results.iter().filter(|c| !c.pass).count()
    }

    pub fn lc2_checks(&self) -> usize {
        self.simplex_results.len()
    }

    pub fn lc2_pass_fraction(&self) -> f64 {
        if self.simplex_results.is_empty() {
            return 1.0;
        }
        1.0 - self.lc2_failures() as f64 / self.lc2_checks() as f64
    }

    pub fn is_certified(&self) -> bool {
        self.lc1_failures() == 0 && self.lc2_failures() == 0
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices = {}", self.vertex_results.len());
        let _ = writeln!(s, "simplices = {}", self.simplex_count);
        let _ = writeln!(s, "lc1_failures = {}", self.lc1_failures());
        let _ = writeln!(s, "lc2_checks = {}", self.lc2_checks());
        let _ = writeln!(s, "lc2_failures = {}", self.lc2_failures());
        let _ = writeln!(s, "lc2_pass_fraction = {:.6}", self.lc2_pass_fraction());
        let _ = writeln!(s, "failure_radius = {}", self.failure_radius);
        let _ = writeln!(s, "certified = {}", self.is_certified());
        s
    }

    /// Failing checks as CSV. Positivity failures leave `simplex_index` empty.
    pub fn write_failures_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "simplex_index,vertex_index,x1,x2,lhs_margin")?;
        for c in self.vertex_results.iter().filter(|c| !c.pass) {
            let x = self.vertices[c.vertex];
            writeln!(out, ",{},{},{},{}", c.vertex, x[0], x[1], c.margin)?;
        }
        for c in self.simplex_results.iter().filter(|c| !c.pass) {
            let x = self.vertices[c.vertex];
            writeln!(out, "{},{},{},{},{}", c.simplex, c.vertex, x[0], x[1], c.lhs)?;
        }
        Ok(())
    }
}
