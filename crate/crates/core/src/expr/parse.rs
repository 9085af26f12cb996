use super::diff::{add, call, mul, neg, pow, sub};
use super::{Builtin, ExprAST, Node};
use crate::error::{Error, ParseError, Result};

/// Parses `text` as an expression in the variables `x1..x{dim}`.
///
/// Precedence from loosest to tightest: `+ -`, `*`, unary `-`, `^`.
/// Exponents must be non-negative integer literals.
pub fn parse_expression(text: &str, dim: usize) -> Result<ExprAST> {
    if dim == 0 {
        return Err(Error::InvalidArgument("expression dimension must be positive".into()));
    }
    let mut parser = Parser { src: text, pos: 0, dim };
    parser.skip_ws();
    if parser.at_end() {
        return Err(parser.error("empty expression").into());
    }
    let root = parser.expr()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.error("unexpected trailing input").into());
    }
    Ok(ExprAST { root, dim })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { position: self.pos, message: message.into() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = add(lhs, self.term()?);
            } else if self.eat(b'-') {
                lhs = sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(b'*') {
            lhs = mul(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat(b'-') {
            return Ok(neg(self.unary()?));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let mut base = self.atom()?;
        while self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected a non-negative integer exponent"));
            }
            let n: u32 = self.src[start..self.pos]
                .parse()
                .map_err(|_| ParseError { position: start, message: "exponent too large".into() })?;
            base = pow(base, n);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(b'0'..=b'9' | b'.') => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(_) => Err(self.error(format!("unexpected character '{}'", self.src[self.pos..].chars().next().unwrap()))),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while matches!(self.peek(), Some(b'0'..=b'9' | b'.')) {
            self.pos += 1;
        }
        // optional exponent, only consumed when followed by digits
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mut p = self.pos + 1;
            if matches!(bytes.get(p), Some(b'+' | b'-')) {
                p += 1;
            }
            if matches!(bytes.get(p), Some(b'0'..=b'9')) {
                self.pos = p;
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.pos += 1;
                }
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(Node::Const)
            .map_err(|_| ParseError { position: start, message: format!("malformed number '{text}'") })
    }

    fn identifier(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if let Some(f) = Builtin::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error(format!("expected '(' after '{name}'")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(call(f, arg));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if let Ok(index) = digits.parse::<usize>() {
                if !digits.starts_with('0') && index >= 1 {
                    if index > self.dim {
                        return Err(ParseError {
                            position: start,
                            message: format!("variable '{name}' out of range for dimension {}", self.dim),
                        });
                    }
                    return Ok(Node::Var(index - 1));
                }
            }
        }
        Err(ParseError { position: start, message: format!("unknown identifier '{name}'") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str, dim: usize) -> ParseError {
        match parse_expression(text, dim) {
            Err(Error::Parse(e)) => e,
            other => panic!("expected parse error for {text:?}, got {other:?}"),
        }
    }

    #[test]
    fn dangling_operator_reports_end_of_input() {
        let e = err("x1 +", 2);
        assert_eq!(e.position, 4);
        assert!(e.message.contains("end of input"));
    }

    #[test]
    fn unknown_identifier() {
        let e = err("2*y1", 2);
        assert_eq!(e.position, 2);
        assert!(e.message.contains("unknown identifier"));
        assert!(err("x0", 2).message.contains("unknown"));
        assert!(err("sqrt(x1)", 2).message.contains("unknown"));
    }

    #[test]
    fn variable_out_of_range() {
        let e = err("x1 + x3", 2);
        assert_eq!(e.position, 5);
        assert!(e.message.contains("out of range"));
    }

    #[test]
    fn division_is_not_in_the_grammar() {
        assert!(err("x1/2", 1).message.contains("trailing"));
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_expression("", 1).is_err());
        assert!(parse_expression("   ", 1).is_err());
        assert!(parse_expression("(x1", 1).is_err());
        assert!(parse_expression("x1^-2", 1).is_err());
        assert!(parse_expression("x1^2.5", 1).is_err());
        assert!(parse_expression("sin x1", 1).is_err());
        assert!(parse_expression("1..2", 1).is_err());
    }

    #[test]
    fn scientific_constants() {
        let e = parse_expression("1.5e-3*x1 + 2E2", 1).unwrap();
        assert!((e.eval(&[2.0]) - 200.003).abs() < 1e-12);
    }
}
