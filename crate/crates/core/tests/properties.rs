use koopman_lyap::cpa::{build_triangulation, certify, compute_e, BBound};
use koopman_lyap::lyapunov::lyapunov_residual;
use koopman_lyap::{parse_expression, solve_p, BoxDomain, ClosedFormEigenfunction, LyapunovModel, VectorField};
use proptest::prelude::*;

fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        (-3.0f64..3.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * {b}")),
            (inner.clone(), 0u32..4).prop_map(|(a, n)| format!("({a})^{n}")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.prop_map(|a| format!("tanh({a})")),
        ]
    })
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    [-1.5f64..1.5, -1.5f64..1.5]
}

proptest! {
    #[test]
    fn expression_gradient_matches_finite_differences(text in expression(), x in point()) {
        let e = parse_expression(&text, 2).unwrap();
        let step = 1e-5;
        for (i, g) in e.gradient().iter().enumerate() {
            let mut xp = x;
            let mut xm = x;
            xp[i] += step;
            xm[i] -= step;
            let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * step);
            let exact = g.eval(&x);
            let scale = 1.0 + fd.abs() + e.eval(&x).abs();
            prop_assert!((exact - fd).abs() <= 1e-5 * scale, "{text}: d/dx{} = {exact} vs {fd}", i + 1);
        }
    }

    #[test]
    fn printed_expression_reparses_to_same_function(text in expression(), x in point()) {
        let e = parse_expression(&text, 2).unwrap();
        let again = parse_expression(&e.to_string(), 2).unwrap();
        let (a, b) = (e.eval(&x), again.eval(&x));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{text} -> {e}: {a} vs {b}");
    }

    #[test]
    fn differentiation_is_linear(a in expression(), b in expression(), c in -2.0f64..2.0, x in point()) {
        let sum = parse_expression(&format!("({a}) + {c} * ({b})"), 2).unwrap();
        let (ea, eb) = (parse_expression(&a, 2).unwrap(), parse_expression(&b, 2).unwrap());
        for i in 0..2 {
            let lhs = sum.differentiate(i).eval(&x);
            let rhs = ea.differentiate(i).eval(&x) + c * eb.differentiate(i).eval(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn lyapunov_matrix_solves_equation(lambdas in proptest::collection::vec(-10.0f64..-0.01, 1..6)) {
        let p = solve_p(&lambdas).unwrap();
        prop_assert!(lyapunov_residual(&lambdas, &p) <= 1e-15);
        for (i, row) in p.iter().enumerate() {
            prop_assert!(row[i] > 0.0);
        }
    }

    #[test]
    fn affine_values_are_reproduced(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, n in 1usize..8, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let tri = build_triangulation(&BoxDomain::symmetric(2.0, 2).unwrap(), 2 * n).unwrap();
        let affine = |x: &[f64]| a * x[0] + b * x[1] + c;
        let values: Vec<f64> = tri.vertices().iter().map(|x| affine(x)).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let got = tri.interpolate(&values, &x).unwrap();
            prop_assert!((got - affine(&x)).abs() <= 1e-12 * (1.0 + got.abs()) * 10.0);
        }
    }

    #[test]
    fn curvature_terms_scale_with_mesh_squared(b11 in 0.0f64..10.0, b12 in 0.0f64..10.0, b22 in 0.0f64..10.0, n in 1usize..6) {
        let b = BBound::new(vec![vec![b11, b12], vec![b12, b22]]).unwrap();
        // away from the origin no simplex is reordered
        let domain = BoxDomain::new(vec![1.0, 1.0], vec![3.0, 3.0]).unwrap();
        let coarse = build_triangulation(&domain, n + 1).unwrap();
        let fine = build_triangulation(&domain, 2 * (n + 1)).unwrap();
        for nu in 0..2 {
            for i in 0..3 {
                let (ec, ef) = (compute_e(&coarse, nu, i, &b), compute_e(&fine, nu, i, &b));
                prop_assert!((ec - 4.0 * ef).abs() <= 1e-12 * (1.0 + ec));
            }
        }
    }

    #[test]
    fn larger_b_never_repairs_a_failure(extra in [0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0], noise in 0.0f64..0.3) {
        let f = VectorField::parse(&["-2*x1", "-3*(x2 - x1^2)"]).unwrap();
        let tri = build_triangulation(&BoxDomain::symmetric(1.0, 2).unwrap(), 8).unwrap();
        let values: Vec<f64> = tri
            .vertices()
            .iter()
            .map(|x| x[0] * x[0] + 0.5 * x[1] * x[1] + noise * (7.0 * x[0]).sin() * x[1])
            .collect();
        let small = BBound::new(vec![vec![6.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let large = BBound::new(vec![vec![6.0 + extra[0], extra[1]], vec![extra[1], extra[2]]]).unwrap();
        let before = certify(&tri, &values, &f, &small).unwrap();
        let after = certify(&tri, &values, &f, &large).unwrap();
        for (s, l) in before.simplex_results().iter().zip(after.simplex_results()) {
            prop_assert!(s.pass || !l.pass);
            prop_assert!(l.lhs >= s.lhs);
        }
    }
}

#[test]
fn linear_decay_certifies_outside_two_cell_ring() {
    let f = VectorField::parse(&["-x1", "-x2"]).unwrap();
    for n in [4, 10, 20, 50] {
        let tri = build_triangulation(&BoxDomain::symmetric(2.0, 2).unwrap(), n).unwrap();
        let values: Vec<f64> = tri.vertices().iter().map(|x| x[0] * x[0] + x[1] * x[1]).collect();
        let report = certify(&tri, &values, &f, &BBound::zeros(2)).unwrap();
        let h = tri.cell_size()[0];
        for c in report.simplex_results().iter().filter(|c| !c.pass) {
            let x = tri.vertices()[c.vertex];
            assert!(x[0].abs() <= 2.0 * h + 1e-12 && x[1].abs() <= 2.0 * h + 1e-12, "failure at {x:?}, n = {n}");
        }
        assert_eq!(report.lc1_failures(), 0);
    }
}

#[test]
fn exact_eigenfunctions_satisfy_decay_identity() {
    use rand::{Rng, SeedableRng};
    let f = VectorField::parse(&["-2*x1", "-3*(x2 - x1^2)"]).unwrap();
    let model = LyapunovModel::new(vec![
        ClosedFormEigenfunction::parse(-2.0, "x1", 2).unwrap(),
        ClosedFormEigenfunction::parse(-3.0, "x2 + 3*x1^2", 2).unwrap(),
    ])
    .unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let chain = model.vdot_star(&f, &x);
        let identity = model.vdot_eigen_identity(&x);
        assert!((chain - identity).abs() <= 1e-10 * (1.0 + identity.abs()), "{chain} vs {identity}");
        assert!(model.v_star(&x) > 0.0);
    }
}
