use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use super::{Expression, Func, Node, Var};

/// Number of variable slots: `x`, `t`, `p1..p9`.
pub const SLOT_COUNT: usize = 11;

/// Dense variable values indexed by [`Var::slot`].
pub type Slots = [f64; SLOT_COUNT];

/// Assignment of values to variables.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Binding {
    values: [Option<f64>; SLOT_COUNT],
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, v: Var, value: f64) -> Self {
        self.set(v, value);
        self
    }

    /// Binds `p1..pn` to the given values.
    pub fn with_params(mut self, p: &[f64]) -> Self {
        for (j, &value) in p.iter().enumerate() {
            self.set(Var::p(j + 1), value);
        }
        self
    }

    pub fn set(&mut self, v: Var, value: f64) {
        self.values[v.slot()] = Some(value);
    }

    pub fn get(&self, v: Var) -> Option<f64> {
        self.values[v.slot()]
    }

    /// Dense slot array; unbound variables read as NaN.
    pub fn slots(&self) -> Slots {
        let mut s = [f64::NAN; SLOT_COUNT];
        for (dst, src) in s.iter_mut().zip(self.values.iter()) {
            if let Some(v) = src {
                *dst = *v;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    Unbound(Var),
    /// Argument outside the domain of `op`; `subterm` is the offending subexpression.
    Domain { op: &'static str, subterm: String },
    /// A compiled evaluation produced a NaN or infinity.
    NonFinite,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Unbound(v) => write!(f, "unbound variable {v}"),
            EvalError::Domain { op, subterm } => write!(f, "domain violation in {op}: {subterm}"),
            EvalError::NonFinite => f.write_str("evaluation produced a non-finite value"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Checked tree-walking evaluation.
pub fn evaluate(e: &Expression, b: &Binding) -> Result<f64, EvalError> {
    let domain = |op, sub: &Expression| EvalError::Domain { op, subterm: sub.to_string() };
    Ok(match e.node() {
        Node::Const(c) => *c,
        Node::Var(v) => b.get(*v).ok_or(EvalError::Unbound(*v))?,
        Node::Add(x, y) => evaluate(x, b)? + evaluate(y, b)?,
        Node::Sub(x, y) => evaluate(x, b)? - evaluate(y, b)?,
        Node::Mul(x, y) => evaluate(x, b)? * evaluate(y, b)?,
        Node::Div(x, y) => {
            let num = evaluate(x, b)?;
            let den = evaluate(y, b)?;
            if den == 0.0 {
                return Err(domain("division", e));
            }
            num / den
        }
        Node::Pow(x, n) => {
            let v = evaluate(x, b)?;
            if v == 0.0 && *n < 0 {
                return Err(domain("power", e));
            }
            v.powi(*n)
        }
        Node::Neg(x) => -evaluate(x, b)?,
        Node::Func(f, x) => {
            let v = evaluate(x, b)?;
            if *f == Func::Log && v <= 0.0 {
                return Err(domain("log", e));
            }
            f.apply(v)
        }
    })
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(u8),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Square(u32),
    Pow(u32, i32),
    Neg(u32),
    Func(Func, u32),
}

/// Expressions flattened into a register program with shared subtrees evaluated once.
///
/// Evaluation is unchecked: domain violations surface as non-finite outputs, which
/// [`Tape::eval`] reports as [`EvalError::NonFinite`].
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<u32>,
    vars: Vec<Var>,
}

thread_local! {
    static REGISTERS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

impl Tape {
    pub fn compile(exprs: &[Expression]) -> Tape {
        let mut b = TapeBuilder { ops: Vec::new(), memo: HashMap::new(), consts: HashMap::new() };
        let outputs = exprs.iter().map(|e| b.emit(e)).collect();
        let mut vars: Vec<Var> = exprs.iter().flat_map(|e| e.free_vars()).collect();
        vars.sort();
        vars.dedup();
        Tape { ops: b.ops, outputs, vars }
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Free variables of the compiled expressions.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Writes every output into `out` (which must have [`Tape::outputs`] entries).
    pub fn eval_raw(&self, slots: &Slots, out: &mut [f64]) {
        REGISTERS.with(|cell| {
            let mut regs = cell.borrow_mut();
            regs.clear();
            regs.reserve(self.ops.len());
            for op in &self.ops {
                let r = |i: u32| regs[i as usize];
                let v = match *op {
                    Op::Const(c) => c,
                    Op::Var(s) => slots[s as usize],
                    Op::Add(a, b) => r(a) + r(b),
                    Op::Sub(a, b) => r(a) - r(b),
                    Op::Mul(a, b) => r(a) * r(b),
                    Op::Div(a, b) => r(a) / r(b),
                    Op::Square(a) => r(a) * r(a),
                    Op::Pow(a, n) => r(a).powi(n),
                    Op::Neg(a) => -r(a),
                    Op::Func(f, a) => f.apply(r(a)),
                };
                regs.push(v);
            }
            for (dst, &src) in out.iter_mut().zip(self.outputs.iter()) {
                *dst = regs[src as usize];
            }
        });
    }

    /// Like [`Tape::eval_raw`] but rejects non-finite results.
    pub fn eval(&self, slots: &Slots, out: &mut [f64]) -> Result<(), EvalError> {
        self.eval_raw(slots, out);
        if out.iter().take(self.outputs.len()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// First output only.
    pub fn eval1(&self, slots: &Slots) -> Result<f64, EvalError> {
        let mut out = [0.0; 1];
        self.eval_raw(slots, &mut out);
        if out[0].is_finite() {
            Ok(out[0])
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

/// Compiled derivative chain `e, de/dv, ..., d^k e/dv^k`.
///
/// `tapes[k]` evaluates the first `k + 1` entries, so low-order requests do not
/// pay for the higher derivatives.
#[derive(Debug, Clone)]
pub struct Derivatives {
    exprs: Vec<Expression>,
    tapes: Vec<Tape>,
}

impl Derivatives {
    pub fn new(e: &Expression, v: Var, max_order: usize) -> Self {
        let exprs = e.derivative_chain(v, max_order);
        let tapes = (0..=max_order).map(|k| Tape::compile(&exprs[..=k])).collect();
        Derivatives { exprs, tapes }
    }

    pub fn max_order(&self) -> usize {
        self.exprs.len() - 1
    }

    /// The `k`-th derivative expression.
    pub fn expr(&self, k: usize) -> &Expression {
        &self.exprs[k]
    }

    /// Free variables of the underlying expression.
    pub fn vars(&self) -> &[Var] {
        self.tapes[self.tapes.len() - 1].vars()
    }

    /// Fills `out[0..=order]`.
    pub fn eval(&self, order: usize, slots: &Slots, out: &mut [f64]) -> Result<(), EvalError> {
        self.tapes[order].eval(slots, &mut out[..=order])
    }
}

struct TapeBuilder {
    ops: Vec<Op>,
    memo: HashMap<usize, u32>,
    consts: HashMap<u64, u32>,
}

impl TapeBuilder {
    fn push(&mut self, op: Op) -> u32 {
        self.ops.push(op);
        (self.ops.len() - 1) as u32
    }

    fn emit(&mut self, e: &Expression) -> u32 {
        if let Some(&r) = self.memo.get(&e.ptr_id()) {
            return r;
        }
        let r = match e.node() {
            Node::Const(c) => {
                let key = c.to_bits();
                if let Some(&r) = self.consts.get(&key) {
                    r
                } else {
                    let r = self.push(Op::Const(*c));
                    self.consts.insert(key, r);
                    r
                }
            }
            Node::Var(v) => self.push(Op::Var(v.slot() as u8)),
            Node::Add(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                self.push(Op::Add(a, b))
            }
            Node::Sub(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                self.push(Op::Sub(a, b))
            }
            Node::Mul(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                self.push(Op::Mul(a, b))
            }
            Node::Div(a, b) => {
                let (a, b) = (self.emit(a), self.emit(b));
                self.push(Op::Div(a, b))
            }
            Node::Pow(a, 2) => {
                let a = self.emit(a);
                self.push(Op::Square(a))
            }
            Node::Pow(a, n) => {
                let a = self.emit(a);
                self.push(Op::Pow(a, *n))
            }
            Node::Neg(a) => {
                let a = self.emit(a);
                self.push(Op::Neg(a))
            }
            Node::Func(f, a) => {
                let a = self.emit(a);
                self.push(Op::Func(*f, a))
            }
        };
        self.memo.insert(e.ptr_id(), r);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn trivial_values() {
        let b = Binding::new().with(Var::X, FRAC_PI_2);
        assert_eq!(evaluate(&parse("sin(x)").unwrap(), &b).unwrap(), 1.0);
        let b = Binding::new().with(Var::X, 1.0);
        assert_eq!(evaluate(&parse("log(x)").unwrap(), &b).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors_name_the_subterm() {
        let b = Binding::new().with(Var::X, -1.0);
        let err = evaluate(&parse("2 + log(x)").unwrap(), &b).unwrap_err();
        assert_eq!(err, EvalError::Domain { op: "log", subterm: "log(x)".into() });
        let b = Binding::new().with(Var::X, 0.0);
        assert!(matches!(
            evaluate(&parse("1 / x").unwrap(), &b),
            Err(EvalError::Domain { op: "division", .. })
        ));
        assert_eq!(
            evaluate(&parse("x + p2").unwrap(), &b),
            Err(EvalError::Unbound(Var::P(2)))
        );
    }

    #[test]
    fn tape_matches_tree_walk() {
        let e = parse("sin(x)^2 * exp(p1) - atan(t / 3) + x^(-3)").unwrap();
        let d = e.differentiate(Var::X);
        let tape = Tape::compile(&[e.clone(), d.clone()]);
        assert_eq!(tape.vars(), &[Var::X, Var::T, Var::P(1)]);
        let b = Binding::new().with(Var::X, 0.4).with(Var::T, -1.2).with(Var::P(1), 0.3);
        let mut out = [0.0; 2];
        tape.eval(&b.slots(), &mut out).unwrap();
        assert!((out[0] - evaluate(&e, &b).unwrap()).abs() < 1e-13);
        assert!((out[1] - evaluate(&d, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tape_reports_non_finite() {
        let tape = Tape::compile(&[parse("log(x)").unwrap()]);
        let b = Binding::new().with(Var::X, -1.0);
        assert_eq!(tape.eval1(&b.slots()), Err(EvalError::NonFinite));
    }
}
