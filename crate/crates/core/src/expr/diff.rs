use std::collections::HashMap;

use super::{Expression, Func, Node, Var};

impl Expression {
    /// Exact symbolic derivative with respect to `v`.
    ///
    /// Shared subtrees are differentiated once, so the result stays a DAG of size
    /// linear in the input.
    pub fn differentiate(&self, v: Var) -> Expression {
        self.diff_memo(v, &mut HashMap::new())
    }

    fn diff_memo(&self, v: Var, memo: &mut HashMap<usize, (Expression, Expression)>) -> Expression {
        if let Some((_, d)) = memo.get(&self.ptr_id()) {
            return d.clone();
        }
        let mut d = |e: &Expression| e.diff_memo(v, memo);
        let out = match self.node() {
            Node::Const(_) => Expression::zero(),
            Node::Var(w) => {
                if *w == v {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            }
            Node::Add(a, b) => Expression::add(d(a), d(b)),
            Node::Sub(a, b) => Expression::sub(d(a), d(b)),
            Node::Mul(a, b) => {
                let (da, db) = (d(a), d(b));
                Expression::add(Expression::mul(da, b.clone()), Expression::mul(a.clone(), db))
            }
            Node::Div(a, b) => {
                let (da, db) = (d(a), d(b));
                if db.is_zero() {
                    Expression::div(da, b.clone())
                } else {
                    Expression::div(
                        Expression::sub(Expression::mul(da, b.clone()), Expression::mul(a.clone(), db)),
                        Expression::powi(b.clone(), 2),
                    )
                }
            }
            Node::Pow(a, n) => {
                let da = d(a);
                Expression::mul(
                    Expression::mul(Expression::constant(*n as f64), Expression::powi(a.clone(), n - 1)),
                    da,
                )
            }
            Node::Neg(a) => Expression::neg(d(a)),
            Node::Func(f, a) => {
                let da = d(a);
                if da.is_zero() {
                    Expression::zero()
                } else {
                    match f {
                        Func::Sin => Expression::mul(Expression::cos(a.clone()), da),
                        Func::Cos => Expression::mul(Expression::neg(Expression::sin(a.clone())), da),
                        Func::Exp => Expression::mul(self.clone(), da),
                        Func::Log => Expression::div(da, a.clone()),
                        Func::Atan => Expression::div(
                            da,
                            Expression::add(Expression::one(), Expression::powi(a.clone(), 2)),
                        ),
                    }
                }
            }
        };
        memo.insert(self.ptr_id(), (self.clone(), out.clone()));
        out
    }

    /// `k`-th derivative with respect to `v`.
    pub fn nth_derivative(&self, v: Var, k: usize) -> Expression {
        (0..k).fold(self.clone(), |e, _| e.differentiate(v))
    }

    /// `[self, d/dv self, ..., d^k/dv^k self]`.
    pub fn derivative_chain(&self, v: Var, k: usize) -> Vec<Expression> {
        let mut out = Vec::with_capacity(k + 1);
        out.push(self.clone());
        for i in 0..k {
            let next = out[i].differentiate(v);
            out.push(next);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::{evaluate, parse, Binding};
    use super::*;

    #[test]
    fn table_rules() {
        let d = parse("sin(x)").unwrap().differentiate(Var::X);
        assert_eq!(d, Expression::cos(Expression::x()));
        let d = parse("x*p1").unwrap().differentiate(Var::P(1));
        assert_eq!(d, Expression::x());
        assert_eq!(parse("p2").unwrap().differentiate(Var::X), Expression::zero());
    }

    #[test]
    fn quotient_and_atan() {
        let e = parse("atan(x) / (1 + x^2)").unwrap();
        let d = e.differentiate(Var::X);
        let b = Binding::new().with(Var::X, 0.7);
        let x: f64 = 0.7;
        let want = (1.0 - 2.0 * x * x.atan()) / (1.0 + x * x).powi(2);
        assert!((evaluate(&d, &b).unwrap() - want).abs() < 1e-14);
    }
}
