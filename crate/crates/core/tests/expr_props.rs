use bvir_core::expr::{evaluate, parse, Binding, Expression, Func, Node, Var};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expression> {
    prop_oneof![
        (-2.0f64..2.0).prop_map(|c| Expression::from_node(Node::Const((c * 64.0).round() / 64.0))),
        Just(Expression::x()),
        Just(Expression::p(1)),
    ]
}

fn func() -> impl Strategy<Value = Func> {
    prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Log), Just(Func::Atan)]
}

/// Unfolded trees of depth at most 6.
fn tree() -> impl Strategy<Value = Expression> {
    leaf().prop_recursive(6, 48, 2, |inner| {
        let node = |n| Expression::from_node(n);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(move |(a, b)| node(Node::Add(a, b))),
            (inner.clone(), inner.clone()).prop_map(move |(a, b)| node(Node::Sub(a, b))),
            (inner.clone(), inner.clone()).prop_map(move |(a, b)| node(Node::Mul(a, b))),
            (inner.clone(), inner.clone()).prop_map(move |(a, b)| node(Node::Div(a, b))),
            (inner.clone(), -2i32..=3).prop_map(move |(a, n)| node(Node::Pow(a, n))),
            inner.clone().prop_map(move |a| node(Node::Neg(a))),
            (func(), inner).prop_map(move |(f, a)| node(Node::Func(f, a))),
        ]
    })
}

fn at(e: &Expression, x: f64) -> Option<f64> {
    evaluate(e, &Binding::new().with(Var::X, x).with(Var::P(1), 0.7)).ok().filter(|v| v.is_finite() && v.abs() < 1e6)
}

fn richardson(e: &Expression, x: f64, h: f64) -> Option<f64> {
    let d = |h: f64| Some((at(e, x + h)? - at(e, x - h)?) / (2.0 * h));
    Some((4.0 * d(0.5 * h)? - d(h)?) / 3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn derivative_matches_finite_differences(e in tree(), x in -1.0f64..1.0) {
        let d = e.differentiate(Var::X);
        let exact = at(&d, x);
        let coarse = richardson(&e, x, 2e-3);
        let fine = richardson(&e, x, 1e-3);
        prop_assume!(exact.is_some() && coarse.is_some() && fine.is_some());
        let (exact, coarse, fine) = (exact.unwrap(), coarse.unwrap(), fine.unwrap());
        let scale = exact.abs().max(1.0);
        // Skip points where the difference quotient has not converged, e.g. near poles.
        prop_assume!((coarse - fine).abs() < 1e-8 * scale);
        prop_assert!((exact - fine).abs() <= 1e-6 * scale, "{e}: {exact} vs {fine}");
    }

    #[test]
    fn printing_round_trips(e in tree()) {
        let text = e.to_string();
        prop_assert_eq!(parse(&text).unwrap(), e);
    }

    #[test]
    fn differentiation_is_linear(f in tree(), g in tree(), a in -3.0f64..3.0, x in -1.0f64..1.0) {
        let lhs = (f.scale(a) + g.clone()).differentiate(Var::X);
        let rhs = f.differentiate(Var::X).scale(a) + g.differentiate(Var::X);
        let (l, r) = (at(&lhs, x), at(&rhs, x));
        prop_assume!(l.is_some() && r.is_some());
        let (l, r) = (l.unwrap(), r.unwrap());
        prop_assert!((l - r).abs() <= 1e-10 * l.abs().max(1.0));
    }

    #[test]
    fn derivative_in_p_ignores_x_only_terms(e in tree()) {
        let only_x = e.substitute(&[(Var::P(1), Expression::constant(0.7))]);
        prop_assert!(only_x.differentiate(Var::P(1)).is_zero());
    }
}

#[test]
fn chained_derivatives_of_shared_subtrees_stay_small() {
    let mut e = parse("sin(x) + p1").unwrap();
    for _ in 0..20 {
        e = e.clone() * e.clone() - e;
    }
    let d3 = e.nth_derivative(Var::X, 3);
    assert!(d3.node_count() < 20_000, "{} nodes", d3.node_count());
}
