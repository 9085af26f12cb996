//! Fixtures shared by the benchmarks.

use koopman_lyap::collocation::grid_centers;
use koopman_lyap::{
    linearize, BoxDomain, CollocationProblem, EigenfunctionSet, KernelModel, LyapunovModel, Regularization,
    VectorField,
};

pub fn example_field() -> VectorField {
    VectorField::parse(&["-2*x1", "-3*(x2 - x1^2)"]).expect("valid field")
}

/// Collocation problem for the slow mode on an `n` by `n` grid over [-5, 5]^2.
pub fn example_problem(n: usize) -> CollocationProblem {
    let field = example_field();
    let lin = linearize(&field).expect("hyperbolic origin");
    let domain = BoxDomain::symmetric(5.0, 2).expect("valid box");
    let centers = grid_centers(&domain, n).expect("valid grid");
    CollocationProblem::new(
        KernelModel::gaussian(3.0).expect("positive width"),
        field,
        lin,
        0,
        centers,
        Regularization::Absolute(1e-10),
        domain,
    )
    .expect("valid problem")
}

pub fn example_model(n: usize) -> LyapunovModel {
    let field = example_field();
    let lin = linearize(&field).expect("hyperbolic origin");
    let domain = BoxDomain::symmetric(5.0, 2).expect("valid box");
    let centers = grid_centers(&domain, n).expect("valid grid");
    let set = EigenfunctionSet::approximate(
        KernelModel::gaussian(3.0).expect("positive width"),
        &field,
        &lin,
        &centers,
        Regularization::Absolute(1e-10),
        &domain,
    )
    .expect("solvable");
    LyapunovModel::from_set(set).expect("stable spectrum")
}
