//! Lyapunov functions for nonlinear ODEs built from kernel approximations of
//! principal Koopman eigenfunctions, plus a continuous piecewise affine (CPA)
//! verification pass on a triangulated box.
//!
//! The pipeline is: parse the vector field ([`expr`]), linearize at the
//! origin ([`dynamics`]), solve one symmetric collocation problem per
//! eigenvalue ([`collocation`], [`kernel`]), assemble eigenfunctions
//! ([`koopman`]) and the quadratic-form Lyapunov candidate ([`lyapunov`]), and
//! certify it on a triangulation ([`cpa`]).

pub mod collocation;
pub mod cpa;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod kernel;
pub mod koopman;
pub mod lyapunov;
mod solve;

pub use collocation::{CollocationProblem, CollocationSolution, Regularization};
pub use cpa::{build_triangulation, certify, estimate_b, BBound, CertificationReport, Triangulation};
pub use domain::BoxDomain;
pub use dynamics::{integrate_flow, linearize, Linearization, Trajectory};
pub use error::{Error, ParseError, Result};
pub use expr::{parse_expression, ExprAST, VectorField};
pub use kernel::KernelModel;
pub use koopman::{path_integral_phi, ClosedFormEigenfunction, Eigenfunction, EigenfunctionLike, EigenfunctionSet};
pub use lyapunov::{solve_p, Diagnostics, LyapunovModel, Quantity, SurfaceGrid};
pub use solve::SolveMethod;
