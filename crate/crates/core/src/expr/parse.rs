//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' int)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'
//! int    := '-'? digits | '(' '-'? digits ')'
//! ```
//!
//! `-` directly followed by a numeric literal (without `^`) yields a negative
//! constant; any other operand yields a negation node. `pi` is accepted as a
//! named constant.

use std::fmt;

use super::{Expression, Func, Node, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    UnknownIdentifier(String),
    InvalidNumber(String),
    Expected(&'static str),
    TrailingInput,
}

/// Syntax error with the byte offset at which it was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at offset {}: ", self.position)?;
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'"),
            ParseErrorKind::UnexpectedEnd => f.write_str("unexpected end of input"),
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier '{s}'"),
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number '{s}'"),
            ParseErrorKind::Expected(what) => write!(f, "expected {what}"),
            ParseErrorKind::TrailingInput => f.write_str("unexpected trailing input"),
        }
    }
}

impl std::error::Error for ParseError {}

/// Parses `text` into the raw AST; no folding is applied.
pub fn parse(text: &str) -> Result<Expression, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(ParseErrorKind::TrailingInput));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { position: self.pos, kind }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8, what: &'static str) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else if self.peek().is_none() {
            Err(self.error(ParseErrorKind::UnexpectedEnd))
        } else {
            Err(self.error(ParseErrorKind::Expected(what)))
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expression::from_node(Node::Add(lhs, rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expression::from_node(Node::Sub(lhs, rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                lhs = Expression::from_node(Node::Mul(lhs, rhs));
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                lhs = Expression::from_node(Node::Div(lhs, rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        if self.eat(b'-') {
            if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                let save = self.pos;
                let value = self.number()?;
                if self.peek() != Some(b'^') {
                    return Ok(Expression::constant(-value));
                }
                self.pos = save;
            }
            let inner = self.factor()?;
            return Ok(Expression::from_node(Node::Neg(inner)));
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let n = self.int()?;
            return Ok(Expression::from_node(Node::Pow(base, n)));
        }
        Ok(base)
    }

    fn int(&mut self) -> Result<i32, ParseError> {
        let paren = self.eat(b'(');
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(ParseErrorKind::Expected("integer exponent")));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut n: i32 = text.parse().map_err(|_| ParseError {
            position: start,
            kind: ParseErrorKind::InvalidNumber(text.to_string()),
        })?;
        if neg {
            n = -n;
        }
        if paren {
            self.expect(b')', "')'")?;
        }
        Ok(n)
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let digits = |pos: &mut usize| {
            while *pos < s.len() && s[*pos].is_ascii_digit() {
                *pos += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut look = self.pos + 1;
            if look < s.len() && (s[look] == b'+' || s[look] == b'-') {
                look += 1;
            }
            if look < s.len() && s[look].is_ascii_digit() {
                self.pos = look;
                digits(&mut self.pos);
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        text.parse::<f64>().map_err(|_| ParseError {
            position: start,
            kind: ParseErrorKind::InvalidNumber(text.to_string()),
        })
    }

    fn base(&mut self) -> Result<Expression, ParseError> {
        match self.peek() {
            None => Err(self.error(ParseErrorKind::UnexpectedEnd)),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')', "')'")?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expression::constant(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if let Some(v) = Var::from_ident(ident) {
                    return Ok(Expression::var(v));
                }
                if ident == "pi" {
                    return Ok(Expression::constant(std::f64::consts::PI));
                }
                if let Some(func) = Func::from_ident(ident) {
                    self.expect(b'(', "'(' after function name")?;
                    let arg = self.expr()?;
                    self.expect(b')', "')'")?;
                    return Ok(Expression::from_node(Node::Func(func, arg)));
                }
                Err(ParseError {
                    position: start,
                    kind: ParseErrorKind::UnknownIdentifier(ident.to_string()),
                })
            }
            Some(c) => Err(self.error(ParseErrorKind::UnexpectedChar(c as char))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(n: Node) -> Expression {
        Expression::from_node(n)
    }

    #[test]
    fn grammar_units() {
        assert_eq!(parse("sin(x)").unwrap(), raw(Node::Func(Func::Sin, Expression::x())));
        assert_eq!(
            parse("x*p1 + 2").unwrap(),
            raw(Node::Add(
                raw(Node::Mul(Expression::x(), Expression::p(1))),
                Expression::constant(2.0)
            ))
        );
        assert_eq!(parse("x^-2").unwrap(), raw(Node::Pow(Expression::x(), -2)));
        assert_eq!(parse("-3").unwrap(), Expression::constant(-3.0));
        assert_eq!(
            parse("-3^2").unwrap(),
            raw(Node::Neg(raw(Node::Pow(Expression::constant(3.0), 2))))
        );
        assert_eq!(parse("1.5e-3").unwrap(), Expression::constant(1.5e-3));
        assert_eq!(parse("pi").unwrap(), Expression::constant(std::f64::consts::PI));
    }

    #[test]
    fn left_associative() {
        let e = parse("x - 1 - 2").unwrap();
        assert!(matches!(e.node(), Node::Sub(a, _) if matches!(a.node(), Node::Sub(..))));
    }

    #[test]
    fn errors_carry_position() {
        let err = parse("sin(x) + y").unwrap_err();
        assert_eq!(err.position, 9);
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("y".into()));
        assert_eq!(parse("(x + 1").unwrap_err().kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(parse("x + ").unwrap_err().kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(parse("x $").unwrap_err().kind, ParseErrorKind::TrailingInput);
        assert_eq!(parse("x^y").unwrap_err().kind, ParseErrorKind::Expected("integer exponent"));
        assert!(matches!(parse("sin x").unwrap_err().kind, ParseErrorKind::Expected(_)));
    }

    #[test]
    fn nested_round_trip() {
        let e = parse("sin(2*(x - p1))").unwrap();
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }
}
