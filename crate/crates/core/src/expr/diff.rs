use super::{Builtin, Node};

pub(super) fn derivative(node: &Node, var: usize) -> Node {
    match node {
        Node::Const(_) => Node::Const(0.0),
        Node::Var(i) => Node::Const(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(derivative(a, var)),
        Node::Add(a, b) => add(derivative(a, var), derivative(b, var)),
        Node::Sub(a, b) => sub(derivative(a, var), derivative(b, var)),
        Node::Mul(a, b) => add(
            mul(derivative(a, var), (**b).clone()),
            mul((**a).clone(), derivative(b, var)),
        ),
        Node::Pow(a, n) => match *n {
            0 => Node::Const(0.0),
            n => mul(
                mul(Node::Const(n as f64), pow((**a).clone(), n - 1)),
                derivative(a, var),
            ),
        },
        Node::Call(f, a) => {
            let inner = derivative(a, var);
            let outer = match f {
                Builtin::Sin => call(Builtin::Cos, (**a).clone()),
                Builtin::Cos => neg(call(Builtin::Sin, (**a).clone())),
                Builtin::Exp => call(Builtin::Exp, (**a).clone()),
                // 1 - tanh^2
                Builtin::Tanh => sub(Node::Const(1.0), pow(call(Builtin::Tanh, (**a).clone()), 2)),
            };
            mul(outer, inner)
        }
    }
}

// Constructors below fold constants and drop neutral elements.

fn is_const(node: &Node, value: f64) -> bool {
    matches!(node, Node::Const(c) if *c == value)
}

pub(super) fn neg(a: Node) -> Node {
    match a {
        Node::Const(c) => Node::Const(-c),
        Node::Neg(inner) => *inner,
        a => Node::Neg(Box::new(a)),
    }
}

pub(super) fn add(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(p), Node::Const(q)) => Node::Const(p + q),
        (a, b) if is_const(&a, 0.0) => b,
        (a, b) if is_const(&b, 0.0) => a,
        (a, b) => Node::Add(Box::new(a), Box::new(b)),
    }
}

pub(super) fn sub(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(p), Node::Const(q)) => Node::Const(p - q),
        (a, b) if is_const(&b, 0.0) => a,
        (a, b) if is_const(&a, 0.0) => neg(b),
        (a, b) => Node::Sub(Box::new(a), Box::new(b)),
    }
}

pub(super) fn mul(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(p), Node::Const(q)) => Node::Const(p * q),
        (a, b) if is_const(&a, 0.0) || is_const(&b, 0.0) => Node::Const(0.0),
        (a, b) if is_const(&a, 1.0) => b,
        (a, b) if is_const(&b, 1.0) => a,
        (a, b) if is_const(&a, -1.0) => neg(b),
        (a, b) if is_const(&b, -1.0) => neg(a),
        // keep constant factors together: c1 * (c2 * e) -> (c1 c2) * e
        (Node::Const(p), Node::Mul(l, r)) if matches!(*l, Node::Const(_)) => {
            let Node::Const(q) = *l else { unreachable!() };
            mul(Node::Const(p * q), *r)
        }
        (Node::Const(p), Node::Neg(e)) => mul(Node::Const(-p), *e),
        (a, b) => Node::Mul(Box::new(a), Box::new(b)),
    }
}

pub(super) fn pow(a: Node, n: u32) -> Node {
    match (a, n) {
        (_, 0) => Node::Const(1.0),
        (a, 1) => a,
        (Node::Const(c), n) => Node::Const(c.powi(n as i32)),
        (a, n) => Node::Pow(Box::new(a), n),
    }
}

pub(super) fn call(f: Builtin, a: Node) -> Node {
    match a {
        Node::Const(c) => Node::Const(f.apply(c)),
        a => Node::Call(f, Box::new(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_expression;

    #[test]
    fn second_partial_of_cubic_is_linear() {
        // Duffing second component with beta = 1: d^2/dx1^2 = -6 x1
        let e = parse_expression("-3*x2 - x1 - x1^3", 2).unwrap();
        let h = e.differentiate(0).differentiate(0);
        assert!(h.as_constant().is_none());
        assert!((h.eval(&[2.0, 0.0]) + 12.0).abs() < 1e-12);
        assert_eq!(e.differentiate(0).differentiate(1).as_constant(), Some(0.0));
        assert_eq!(e.differentiate(1).differentiate(1).as_constant(), Some(0.0));
    }

    #[test]
    fn linear_field_has_constant_jacobian() {
        let e = parse_expression("-2*x1 + 0.5*x2", 2).unwrap();
        assert_eq!(e.differentiate(0).as_constant(), Some(-2.0));
        assert_eq!(e.differentiate(1).as_constant(), Some(0.5));
    }

    #[test]
    fn builtin_chain_rule() {
        let e = parse_expression("tanh(2*x1) + exp(x1*x2) + cos(x2)", 2).unwrap();
        let x = [0.3, -0.7];
        let d0 = e.differentiate(0).eval(&x);
        let d1 = e.differentiate(1).eval(&x);
        let t = (0.6f64).tanh();
        let ex = (x[0] * x[1]).exp();
        assert!((d0 - (2.0 * (1.0 - t * t) + x[1] * ex)).abs() < 1e-14);
        assert!((d1 - (x[0] * ex - x[1].sin())).abs() < 1e-14);
    }
}
