use bvir_core::expr::{parse, Binding, Derivatives, Expression, Var};
use bvir_core::geometry::{integrate_arc, PiecewiseJetMap, QuadratureSpec, Side, TWO_PI};
use bvir_core::sampling::rng;
use rand::Rng;
use std::f64::consts::PI;

fn lift(s: &str) -> PiecewiseJetMap {
    PiecewiseJetMap::from_lift(parse(s).unwrap()).unwrap()
}

fn random_lift<R: Rng>(r: &mut R) -> Expression {
    // Total slope of the perturbation stays below 0.6.
    let (a, b) = (r.gen_range(-0.3..0.3), r.gen_range(-0.15..0.15));
    let (s, t) = (r.gen_range(0.0..TWO_PI), r.gen_range(0.0..TWO_PI));
    parse(&format!("x + {a}*sin(x + {s}) + {b}*cos(2*x + {t})")).unwrap()
}

#[test]
fn expression_jets_match_closed_form_derivatives() {
    let f = lift("x + 0.3*sin(x) + 0.1*cos(2*x)");
    let mut r = rng(21);
    for _ in 0..50 {
        let x: f64 = r.gen_range(-10.0..10.0);
        let want = [
            x + 0.3 * x.sin() + 0.1 * (2.0 * x).cos(),
            1.0 + 0.3 * x.cos() - 0.2 * (2.0 * x).sin(),
            -0.3 * x.sin() - 0.4 * (2.0 * x).cos(),
            -0.3 * x.cos() + 0.8 * (2.0 * x).sin(),
            0.3 * x.sin() + 1.6 * (2.0 * x).cos(),
        ];
        let j = f.jet(x, Side::Auto, 4).unwrap();
        for k in 0..5 {
            assert!((j.d(k) - want[k]).abs() < 1e-12, "order {k} at {x}");
        }
    }
}

#[test]
fn composed_jets_match_symbolic_composition() {
    let mut r = rng(22);
    for _ in 0..10 {
        let (fe, ge) = (random_lift(&mut r), random_lift(&mut r));
        let fg = PiecewiseJetMap::compose(&PiecewiseJetMap::from_lift(fe.clone()).unwrap(), &PiecewiseJetMap::from_lift(ge.clone()).unwrap()).unwrap();
        let symbolic = Derivatives::new(&fe.substitute(&[(Var::X, ge)]), Var::X, 3);
        for _ in 0..20 {
            let x: f64 = r.gen_range(0.0..TWO_PI);
            let mut want = [0.0; 4];
            symbolic.eval(3, &Binding::new().with(Var::X, x).slots(), &mut want).unwrap();
            let j = fg.jet(x, Side::Auto, 3).unwrap();
            for k in 0..4 {
                assert!((j.d(k) - want[k]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn composition_is_associative_for_broken_maps() {
    let f = PiecewiseJetMap::from_pieces(&[0.5, 3.0], vec![parse("x + 0.2*sin((x - 0.5)*pi/2.5)").unwrap(), parse("x + 0.1*sin((x - 3)*pi/(2*pi - 2.5))").unwrap()]).unwrap();
    f.validate_diffeo(32).unwrap();
    let g = lift("x + 0.25*sin(x + 1)");
    let h = PiecewiseJetMap::from_pieces(&[1.0], vec![parse("x + 0.3*sin(x - 1)").unwrap()]).unwrap();
    let left = PiecewiseJetMap::compose(&PiecewiseJetMap::compose(&f, &g).unwrap(), &h).unwrap();
    let right = PiecewiseJetMap::compose(&f, &PiecewiseJetMap::compose(&g, &h).unwrap()).unwrap();
    assert_eq!(left.breaks().len(), right.breaks().len());
    for (a, b) in left.breaks().iter().zip(right.breaks()) {
        assert!((a - b).abs() < 1e-10);
    }
    let mut r = rng(23);
    for _ in 0..40 {
        let x = r.gen_range(0.0..TWO_PI);
        let (a, b) = (left.jet(x, Side::Auto, 3).unwrap(), right.jet(x, Side::Auto, 3).unwrap());
        for k in 0..4 {
            assert!((a.d(k) - b.d(k)).abs() < 1e-9);
        }
    }
}

#[test]
fn composition_pulls_back_breaks() {
    let f = PiecewiseJetMap::from_pieces(&[1.0, 4.0], vec![parse("x + 0.2*sin((x - 1)*pi/3)").unwrap(), parse("x").unwrap()]).unwrap();
    f.validate_diffeo(32).unwrap();
    let g = PiecewiseJetMap::from_pieces(&[2.0], vec![parse("x + 0.3*sin(x - 2)").unwrap()]).unwrap();
    let fg = PiecewiseJetMap::compose(&f, &g).unwrap();
    let mut want = vec![2.0, g.solve(1.0).unwrap(), g.solve(4.0).unwrap()];
    want.iter_mut().for_each(|w| *w = w.rem_euclid(TWO_PI));
    want.sort_by(f64::total_cmp);
    let mut got: Vec<f64> = fg.breaks().iter().map(|b| b.rem_euclid(TWO_PI)).collect();
    got.sort_by(f64::total_cmp);
    assert_eq!(got.len(), 3);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-10, "{got:?} vs {want:?}");
    }
}

#[test]
fn inversion_round_trips() {
    let f = lift("x + 0.3*sin(x)");
    let inv = f.invert().unwrap();
    for k in 0..100 {
        let x = -3.0 + 0.09 * k as f64;
        assert!((inv.value(f.value(x).unwrap()).unwrap() - x).abs() < 1e-10);
    }
    let back = inv.invert().unwrap();
    let rot = PiecewiseJetMap::rotation(0.7).invert().unwrap();
    for k in 0..20 {
        let x = 0.3 * k as f64;
        assert!((back.value(x).unwrap() - f.value(x).unwrap()).abs() < 1e-10);
        assert!((rot.value(x).unwrap() - (x - 0.7)).abs() < 1e-12);
        // periodicity of the inverse lift
        assert!((inv.value(x + TWO_PI).unwrap() - inv.value(x).unwrap() - TWO_PI).abs() < 1e-10);
    }
    // (f^-1)''' against the inverse-function formula at f^-1(y)
    let y = 1.3;
    let x = inv.value(y).unwrap();
    let j = f.jet(x, Side::Auto, 3).unwrap();
    let want = (3.0 * j.d(2).powi(2) - j.d(1) * j.d(3)) / j.d(1).powi(5);
    assert!((inv.jet(y, Side::Auto, 3).unwrap().d(3) - want).abs() < 1e-10);
}

#[test]
fn polynomial_quadrature_matches_antiderivative() {
    let mut r = rng(24);
    let q = QuadratureSpec::default();
    for _ in 0..20 {
        let c: Vec<f64> = (0..=8).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (a, b) = (r.gen_range(-2.0..0.0), r.gen_range(0.5..2.5));
        let poly = |x: f64| c.iter().rev().fold(0.0, |acc, ck| acc * x + ck);
        let anti = |x: f64| c.iter().enumerate().map(|(k, ck)| ck * x.powi(k as i32 + 1) / (k + 1) as f64).sum::<f64>();
        let got = integrate_arc(|x| Ok(poly(x)), a, b, &q).unwrap();
        assert!((got - (anti(b) - anti(a))).abs() < 1e-11);
    }
}

#[test]
fn one_sided_jets_at_breaks() {
    let f = PiecewiseJetMap::from_pieces(&[0.0, 3.0], vec![parse("x + 0.2*sin(x*pi/3)").unwrap(), parse("x - 0.1*sin((x - 3)*pi/(2*pi - 3))").unwrap()]).unwrap();
    f.validate_diffeo(32).unwrap();
    let l = f.jet(3.0, Side::Left, 1).unwrap();
    let rt = f.jet(3.0, Side::Right, 1).unwrap();
    assert!((l.value() - rt.value()).abs() < 1e-12);
    assert!((l.d(1) - (1.0 - 0.2 * PI / 3.0)).abs() < 1e-12);
    assert!((rt.d(1) - (1.0 - 0.1 * PI / (TWO_PI - 3.0))).abs() < 1e-12);
    assert!(f.jet_strict(3.0, Side::Auto, 1).is_err());
}
