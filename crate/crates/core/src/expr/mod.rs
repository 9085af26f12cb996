//! Scalar expressions over the state variables `x1..xd`.
//!
//! The grammar is intentionally small: `+ - *`, unary minus, integer powers
//! `^n`, parentheses, decimal constants and the builtins `sin`, `cos`, `exp`
//! and `tanh`. There is no division, so evaluation is total on finite input.
//! Derivatives are computed structurally and come back as new expressions,
//! which lets callers build Jacobians and Hessians once and evaluate them
//! many times.

mod diff;
mod parse;

use std::fmt;

use crate::error::{Error, Result};

pub use parse::parse_expression;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Sin,
    Cos,
    Exp,
    Tanh,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Exp => "exp",
            Builtin::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "exp" => Builtin::Exp,
            "tanh" => Builtin::Tanh,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Builtin::Sin => v.sin(),
            Builtin::Cos => v.cos(),
            Builtin::Exp => v.exp(),
            Builtin::Tanh => v.tanh(),
        }
    }
}

/// Expression tree node. Variables are stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    Call(Builtin, Box<Node>),
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Pow(a, n) => a.eval(x).powi(*n as i32),
            Node::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.max_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(p), Some(q)) => Some(p.max(q)),
                    (p, q) => p.or(q),
                }
            }
        }
    }

    // Binding strength used by the printer: higher binds tighter.
    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) => 2,
            Node::Neg(_) => 3,
            Node::Pow(..) => 4,
            Node::Const(c) if *c < 0.0 => 3,
            Node::Const(_) | Node::Var(_) | Node::Call(..) => 5,
        }
    }

    fn write(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(out, "-{}", -c)
                } else {
                    write!(out, "{c}")
                }
            }
            Node::Var(i) => write!(out, "x{}", i + 1),
            Node::Neg(a) => {
                out.write_str("-")?;
                write_operand(out, a, 4)
            }
            Node::Add(a, b) => {
                write_operand(out, a, 1)?;
                out.write_str(" + ")?;
                write_operand(out, b, 2)
            }
            Node::Sub(a, b) => {
                write_operand(out, a, 1)?;
                out.write_str(" - ")?;
                write_operand(out, b, 2)
            }
            Node::Mul(a, b) => {
                write_operand(out, a, 2)?;
                out.write_str("*")?;
                write_operand(out, b, 3)
            }
            Node::Pow(a, n) => {
                write_operand(out, a, 5)?;
                write!(out, "^{n}")
            }
            Node::Call(f, a) => {
                write!(out, "{}(", f.name())?;
                a.write(out)?;
                out.write_str(")")
            }
        }
    }
}

fn write_operand(out: &mut fmt::Formatter<'_>, node: &Node, min_prec: u8) -> fmt::Result {
    if node.precedence() < min_prec {
        out.write_str("(")?;
        node.write(out)?;
        out.write_str(")")
    } else {
        node.write(out)
    }
}

/// A parsed scalar expression in `dim` state variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAST {
    root: Node,
    dim: usize,
}

impl ExprAST {
    /// Wraps a node, checking that every variable index is below `dim`.
    pub fn new(root: Node, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("expression dimension must be positive".into()));
        }
        if let Some(i) = root.max_var() {
            if i >= dim {
                return Err(Error::InvalidArgument(format!(
                    "variable x{} out of range for dimension {dim}",
                    i + 1
                )));
            }
        }
        Ok(ExprAST { root, dim })
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        ExprAST { root: Node::Const(value), dim }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Returns the value when the expression folded to a constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Panics if `x` is shorter than `dim`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert!(x.len() >= self.dim, "point has {} coordinates, expression needs {}", x.len(), self.dim);
        self.root.eval(x)
    }

    /// Exact partial derivative with respect to the zero-based variable `var`.
    pub fn differentiate(&self, var: usize) -> ExprAST {
        assert!(var < self.dim, "variable index {var} out of range for dimension {}", self.dim);
        ExprAST { root: diff::derivative(&self.root, var), dim: self.dim }
    }

    pub fn gradient(&self) -> Vec<ExprAST> {
        (0..self.dim).map(|i| self.differentiate(i)).collect()
    }
}

impl fmt::Display for ExprAST {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f)
    }
}

/// The right-hand side `f` of `x' = f(x)`, one expression per component.
#[derive(Debug, Clone)]
pub struct VectorField {
    components: Vec<ExprAST>,
    jacobian: Vec<Vec<ExprAST>>,
}

impl VectorField {
    pub fn new(components: Vec<ExprAST>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("vector field needs at least one component".into()));
        }
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::Dimension { expected: dim, got: c.dim() });
        }
        let jacobian = components.iter().map(ExprAST::gradient).collect();
        Ok(VectorField { components, jacobian })
    }

    /// Parses one expression per component; the dimension is the number of strings.
    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self> {
        let dim = sources.len();
        let components = sources
            .iter()
            .map(|s| parse_expression(s.as_ref(), dim))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ExprAST] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x);
        }
    }

    /// Symbolic Jacobian entries, `jacobian_exprs()[j][r] = d f_j / d x_r`.
    pub fn jacobian_exprs(&self) -> &[Vec<ExprAST>] {
        &self.jacobian
    }

    pub fn jacobian_at(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.jacobian
            .iter()
            .map(|row| row.iter().map(|e| e.eval(x)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, d: usize) -> ExprAST {
        parse_expression(s, d).unwrap()
    }

    #[test]
    fn example_one_second_component() {
        let e = parse("-3*(x2 - x1^2)", 2);
        assert_eq!(e.eval(&[1.0, 0.0]), 3.0);
        assert_eq!(e.eval(&[0.0, 2.0]), -6.0);
    }

    #[test]
    fn projections() {
        assert_eq!(parse("x1", 2).eval(&[0.0, 0.0]), 0.0);
        assert_eq!(parse("x2", 2).eval(&[2.0, 5.0]), 5.0);
        assert_eq!(parse("-2*x1", 2).eval(&[1.5, 9.0]), -3.0);
    }

    #[test]
    fn derivatives_of_example_one() {
        let e = parse("-3*(x2 - x1^2)", 2);
        let d1 = e.differentiate(0);
        for x1 in [-2.0, 0.5, 3.0] {
            assert!((d1.eval(&[x1, 7.0]) - 6.0 * x1).abs() < 1e-12);
        }
        let d11 = d1.differentiate(0);
        assert_eq!(d11.as_constant(), Some(6.0));
        assert_eq!(parse("x1", 2).differentiate(1).as_constant(), Some(0.0));
    }

    #[test]
    fn builtins_and_precedence() {
        let e = parse("-x1^2 + 2*sin(x2)*exp(0) - tanh(0)", 2);
        let v = e.eval(&[3.0, 1.0]);
        assert!((v - (-9.0 + 2.0 * 1f64.sin())).abs() < 1e-14);
        assert_eq!(parse("2^3^1", 1).eval(&[0.0]), 8.0);
        assert_eq!(parse("1 - 2 - 3", 1).eval(&[0.0]), -4.0);
    }

    #[test]
    fn display_reparses() {
        for s in ["-3*(x2 - x1^2)", "-(x1 - x2)^3", "x1 - (x2 - x1)", "cos(-x1)*-2.5", "(-2)^2"] {
            let e = parse(s, 2);
            let back = parse(&e.to_string(), 2);
            for p in [[0.3, -1.2], [2.0, 0.5], [-1.0, -1.0]] {
                assert_eq!(e.eval(&p), back.eval(&p), "{s} -> {e}");
            }
        }
    }

    #[test]
    fn vector_field_jacobian() {
        let f = VectorField::parse(&["-2*x1", "-3*(x2 - x1^2)"]).unwrap();
        assert_eq!(f.jacobian_at(&[0.0, 0.0]), vec![vec![-2.0, 0.0], vec![0.0, -3.0]]);
        assert_eq!(f.eval(&[1.0, 1.0]), vec![-2.0, 0.0]);
    }

    #[test]
    fn vector_field_rejects_mismatched_dims() {
        let a = parse("x1", 1);
        let b = parse("x2", 2);
        assert!(VectorField::new(vec![a, b]).is_err());
    }
}
