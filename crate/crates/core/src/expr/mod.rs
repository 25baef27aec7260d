//! Scalar expression DSL.
//!
//! Every field profile, diffeomorphism lift and base function in this crate is an
//! [`Expression`] over the variables `x`, `t` and `p1..p9`. Expressions can be
//! parsed, printed, differentiated symbolically and evaluated, either through the
//! checked tree walker ([`evaluate`]) or through a compiled [`Tape`] for hot loops.

mod diff;
mod eval;
mod parse;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

pub use eval::{evaluate, Binding, Derivatives, EvalError, Slots, Tape, SLOT_COUNT};
pub use parse::{parse, ParseError, ParseErrorKind};

/// Largest break index usable as a variable (`p1` … `p9`).
pub const MAX_PARAMS: usize = 9;

/// A free variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    T,
    /// Break coordinate `p_k`, `1 <= k <= 9`.
    P(u8),
}

impl Var {
    /// `p_k` for a 1-based index.
    pub fn p(k: usize) -> Var {
        assert!((1..=MAX_PARAMS).contains(&k), "break index {k} out of range");
        Var::P(k as u8)
    }

    /// Position of this variable in a [`Slots`] array.
    pub fn slot(self) -> usize {
        match self {
            Var::X => 0,
            Var::T => 1,
            Var::P(k) => 1 + k as usize,
        }
    }

    pub(crate) fn from_ident(s: &str) -> Option<Var> {
        match s {
            "x" => Some(Var::X),
            "t" => Some(Var::T),
            _ => {
                let digits = s.strip_prefix('p')?;
                if digits.len() != 1 {
                    return None;
                }
                let k = digits.parse::<u8>().ok()?;
                (1..=MAX_PARAMS as u8).contains(&k).then_some(Var::P(k))
            }
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => f.write_str("x"),
            Var::T => f.write_str("t"),
            Var::P(k) => write!(f, "p{k}"),
        }
    }
}

/// Unary elementary functions of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Atan,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Atan => "atan",
        }
    }

    pub(crate) fn from_ident(s: &str) -> Option<Func> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "atan" => Some(Func::Atan),
            _ => None,
        }
    }

    pub(crate) fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Atan => v.atan(),
        }
    }
}

/// AST node. Children are shared, so cloning an [`Expression`] is cheap.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Add(Expression, Expression),
    Sub(Expression, Expression),
    Mul(Expression, Expression),
    Div(Expression, Expression),
    Pow(Expression, i32),
    Neg(Expression),
    Func(Func, Expression),
}

/// Immutable, reference-counted expression tree.
#[derive(Clone)]
pub struct Expression(Arc<Node>);

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

impl Expression {
    /// Wraps a node verbatim, without any folding.
    pub fn from_node(node: Node) -> Self {
        Expression(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var(v: Var) -> Self {
        Self::from_node(Node::Var(v))
    }

    pub fn x() -> Self {
        Self::var(Var::X)
    }

    /// `p_k`, 1-based.
    pub fn p(k: usize) -> Self {
        Self::var(Var::p(k))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    // Folding constructors. These are what differentiation and substitution build
    // with; the parser keeps the raw shape instead.

    pub fn add(a: Expression, b: Expression) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Self::constant(x + y),
            (Some(c), _) if c == 0.0 => b,
            (_, Some(c)) if c == 0.0 => a,
            _ => Self::from_node(Node::Add(a, b)),
        }
    }

    pub fn sub(a: Expression, b: Expression) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Self::constant(x - y),
            (_, Some(c)) if c == 0.0 => a,
            (Some(c), _) if c == 0.0 => Self::neg(b),
            _ => Self::from_node(Node::Sub(a, b)),
        }
    }

    pub fn mul(a: Expression, b: Expression) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Self::constant(x * y),
            (Some(c), _) | (_, Some(c)) if c == 0.0 => Self::zero(),
            (Some(c), _) if c == 1.0 => b,
            (_, Some(c)) if c == 1.0 => a,
            (Some(c), _) if c == -1.0 => Self::neg(b),
            (_, Some(c)) if c == -1.0 => Self::neg(a),
            _ => Self::from_node(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expression, b: Expression) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Self::constant(x / y),
            (Some(c), _) if c == 0.0 => Self::zero(),
            (_, Some(c)) if c == 1.0 => a,
            _ => Self::from_node(Node::Div(a, b)),
        }
    }

    pub fn powi(a: Expression, n: i32) -> Self {
        match (a.as_const(), n) {
            (_, 0) => Self::one(),
            (_, 1) => a,
            (Some(c), _) if c != 0.0 || n > 0 => Self::constant(c.powi(n)),
            _ => Self::from_node(Node::Pow(a, n)),
        }
    }

    pub fn neg(a: Expression) -> Self {
        match a.node() {
            Node::Const(c) => Self::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Self::from_node(Node::Neg(a)),
        }
    }

    pub fn func(f: Func, a: Expression) -> Self {
        if let Some(c) = a.as_const() {
            let v = f.apply(c);
            if v.is_finite() {
                return Self::constant(v);
            }
        }
        Self::from_node(Node::Func(f, a))
    }

    pub fn sin(a: Expression) -> Self {
        Self::func(Func::Sin, a)
    }

    pub fn cos(a: Expression) -> Self {
        Self::func(Func::Cos, a)
    }

    pub fn exp(a: Expression) -> Self {
        Self::func(Func::Exp, a)
    }

    pub fn log(a: Expression) -> Self {
        Self::func(Func::Log, a)
    }

    pub fn atan(a: Expression) -> Self {
        Self::func(Func::Atan, a)
    }

    /// `c * self` with folding.
    pub fn scale(&self, c: f64) -> Self {
        Self::mul(Self::constant(c), self.clone())
    }

    /// Sum of a list of terms; zero for an empty list.
    pub fn sum<I: IntoIterator<Item = Expression>>(terms: I) -> Self {
        terms.into_iter().fold(Self::zero(), Self::add)
    }

    /// Whether `v` occurs in the expression.
    pub fn depends_on(&self, v: Var) -> bool {
        self.free_vars().contains(&v)
    }

    /// Sorted list of free variables.
    pub fn free_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.collect_vars(&mut out, &mut seen);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>, seen: &mut HashSet<usize>) {
        if !seen.insert(self.ptr_id()) {
            return;
        }
        match self.node() {
            Node::Const(_) => {}
            Node::Var(v) => out.push(*v),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_vars(out, seen);
                b.collect_vars(out, seen);
            }
            Node::Pow(a, _) | Node::Neg(a) | Node::Func(_, a) => a.collect_vars(out, seen),
        }
    }

    /// Simultaneous substitution of variables by expressions, rebuilt with folding.
    pub fn substitute(&self, subs: &[(Var, Expression)]) -> Expression {
        self.subst_memo(subs, &mut HashMap::new())
    }

    fn subst_memo(&self, subs: &[(Var, Expression)], memo: &mut HashMap<usize, (Expression, Expression)>) -> Expression {
        if let Some((_, r)) = memo.get(&self.ptr_id()) {
            return r.clone();
        }
        let mut s = |e: &Expression| e.subst_memo(subs, memo);
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(v) => subs
                .iter()
                .find(|(w, _)| w == v)
                .map(|(_, e)| e.clone())
                .unwrap_or_else(|| self.clone()),
            Node::Add(a, b) => {
                let (a, b) = (s(a), s(b));
                Self::add(a, b)
            }
            Node::Sub(a, b) => {
                let (a, b) = (s(a), s(b));
                Self::sub(a, b)
            }
            Node::Mul(a, b) => {
                let (a, b) = (s(a), s(b));
                Self::mul(a, b)
            }
            Node::Div(a, b) => {
                let (a, b) = (s(a), s(b));
                Self::div(a, b)
            }
            Node::Pow(a, n) => Self::powi(s(a), *n),
            Node::Neg(a) => Self::neg(s(a)),
            Node::Func(f, a) => Self::func(*f, s(a)),
        };
        memo.insert(self.ptr_id(), (self.clone(), out.clone()));
        out
    }

    /// Replaces break variables `p1..pn` by the given numeric values.
    pub fn bind_params(&self, p: &[f64]) -> Expression {
        let subs: Vec<_> = p
            .iter()
            .enumerate()
            .map(|(j, &v)| (Var::p(j + 1), Expression::constant(v)))
            .collect();
        self.substitute(&subs)
    }

    /// Number of nodes, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                1 + a.size() + b.size()
            }
            Node::Pow(a, _) | Node::Neg(a) | Node::Func(_, a) => 1 + a.size(),
        }
    }

    /// Number of distinct nodes of the underlying DAG.
    pub fn node_count(&self) -> usize {
        fn walk(e: &Expression, seen: &mut HashSet<usize>) {
            if !seen.insert(e.ptr_id()) {
                return;
            }
            match e.node() {
                Node::Const(_) | Node::Var(_) => {}
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, seen);
                    walk(b, seen);
                }
                Node::Pow(a, _) | Node::Neg(a) | Node::Func(_, a) => walk(a, seen),
            }
        }
        let mut seen = HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Const(c) if c.is_sign_negative() => 3,
            Node::Pow(..) => 4,
            Node::Const(_) | Node::Var(_) | Node::Func(..) => 5,
        }
    }
}

macro_rules! impl_binop {
    ($tr:ident, $method:ident, $ctor:ident) => {
        impl std::ops::$tr for Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                Expression::$ctor(self, rhs)
            }
        }
        impl std::ops::$tr<&Expression> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                Expression::$ctor(self.clone(), rhs.clone())
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);
impl_binop!(Div, div, div);

impl std::ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::neg(self)
    }
}

impl std::str::FromStr for Expression {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse(s)
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expression, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `{:?}` is the shortest representation that round-trips through `f64::from_str`.
    write!(f, "{c:?}")
}

// The printer emits the minimal parenthesization that re-parses to the same tree:
// left operands need parentheses only for strictly looser binding, right operands
// also for equal binding (both operators are left-associative).
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write_number(f, *c),
            Node::Var(v) => write!(f, "{v}"),
            Node::Add(a, b) | Node::Sub(a, b) => {
                let op = if matches!(self.node(), Node::Add(..)) { " + " } else { " - " };
                write_child(f, a, a.precedence() < 1)?;
                f.write_str(op)?;
                write_child(f, b, b.precedence() <= 1)
            }
            Node::Mul(a, b) | Node::Div(a, b) => {
                let op = if matches!(self.node(), Node::Mul(..)) { " * " } else { " / " };
                write_child(f, a, a.precedence() < 2)?;
                f.write_str(op)?;
                write_child(f, b, b.precedence() <= 2)
            }
            Node::Neg(a) => {
                f.write_str("-")?;
                // A bare literal after '-' would re-parse as a negative constant.
                let literal = matches!(a.node(), Node::Const(c) if !c.is_sign_negative());
                write_child(f, a, literal || a.precedence() < 3)
            }
            Node::Pow(a, n) => {
                write_child(f, a, a.precedence() < 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_idents() {
        assert_eq!(Var::from_ident("p3"), Some(Var::P(3)));
        assert_eq!(Var::from_ident("p0"), None);
        assert_eq!(Var::from_ident("p10"), None);
        assert_eq!(Var::from_ident("y"), None);
        assert_eq!(Var::P(9).slot(), 10);
    }

    #[test]
    fn folding_constructors() {
        let x = Expression::x();
        assert_eq!(Expression::mul(Expression::zero(), x.clone()), Expression::zero());
        assert_eq!(Expression::add(x.clone(), Expression::zero()), x);
        assert_eq!(Expression::neg(Expression::neg(x.clone())), x);
        assert_eq!(Expression::sin(Expression::zero()), Expression::zero());
        // log of a negative constant is left for evaluation to reject
        assert!(Expression::log(Expression::constant(-1.0)).as_const().is_none());
    }

    #[test]
    fn substitution_is_simultaneous() {
        let e = parse("x * p1").unwrap();
        let swapped = e.substitute(&[(Var::X, Expression::p(1)), (Var::P(1), Expression::x())]);
        assert_eq!(swapped.to_string(), "p1 * x");
    }

    #[test]
    fn printing_precedence() {
        for s in ["x - (p1 - 2.0)", "-x^2", "(-x)^2", "-(2.0)", "x / (p1 * t)", "(-2.0)^3"] {
            let e = parse(s).unwrap();
            assert_eq!(e.to_string(), s);
        }
    }
}
