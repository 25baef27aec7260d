use bvir_core::expr::parse;
use bvir_core::geometry::{BreakConfig, QuadratureSpec, Side, TWO_PI};
use bvir_core::groupoid::*;
use bvir_core::linkage::FlowSpec;
use bvir_core::sampling::{random_arrow, random_composable_triple, random_config, rng};
use rand::Rng;

fn spec() -> FlowSpec {
    FlowSpec::new(400).unwrap()
}

fn close_jets(a: &BrokenDiffeo, b: &BrokenDiffeo, x: f64, tol: f64) {
    let side = Side::Right;
    let (ja, jb) = (a.map().jet(x, side, 2).unwrap(), b.map().jet(x, side, 2).unwrap());
    for k in 0..3 {
        assert!((ja.d(k) - jb.d(k)).abs() < tol, "order {k} at {x}: {} vs {}", ja.d(k), jb.d(k));
    }
}

#[test]
fn unit_and_inverse_laws() {
    let mut r = rng(41);
    for n in 1..=3 {
        let p = random_config(&mut r, n, 0.6).unwrap();
        let phi = random_arrow(&mut r, &p, &spec()).unwrap();
        let left = BrokenDiffeo::identity(phi.trg()).compose(&phi).unwrap();
        let right = phi.compose(&BrokenDiffeo::identity(phi.src())).unwrap();
        let inv = phi.inverse().unwrap();
        let round = inv.compose(&phi).unwrap();
        let other = phi.compose(&inv).unwrap();
        assert!(round.trg().approx_eq(phi.src(), 1e-9) && other.src().approx_eq(phi.trg(), 1e-9));
        for k in 0..100 {
            let x = r.gen_range(0.0..TWO_PI) + 1e-3 * k as f64;
            close_jets(&left, &phi, x, 1e-10);
            close_jets(&right, &phi, x, 1e-10);
            let j = round.map().jet(x, Side::Right, 2).unwrap();
            assert!((j.value() - x).abs() < 1e-9 && (j.d(1) - 1.0).abs() < 1e-9 && j.d(2).abs() < 1e-8);
        }
    }
}

#[test]
fn source_and_target_of_composites() {
    let mut r = rng(42);
    let (phi, psi, _) = random_composable_triple(&mut r, 2, &spec()).unwrap();
    let c = phi.compose(&psi).unwrap();
    assert!(c.src().approx_eq(psi.src(), 1e-12));
    assert!(c.trg().approx_eq(phi.trg(), 1e-9));
    assert!(matches!(psi.compose(&phi), Err(bvir_core::Error::NotComposable(_))));
}

#[test]
fn cocycle_identity_on_flow_triples() {
    let mut r = rng(43);
    let q = QuadratureSpec::default();
    for k in 0..6 {
        let (phi, psi, eta) = random_composable_triple(&mut r, 1 + k % 3, &spec()).unwrap();
        let res = groupoid_cocycle_residual(&phi, &psi, &eta, &q).unwrap();
        assert!(res.iter().all(|v| v.abs() < 1e-8), "{res:?}");
        let id = BrokenDiffeo::identity(psi.src());
        let res = groupoid_cocycle_residual(&phi, &psi, &id, &q).unwrap();
        assert!(res.iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn cocycle_identity_with_rotation() {
    let mut r = rng(44);
    let q = QuadratureSpec::default();
    let p = random_config(&mut r, 2, 0.6).unwrap();
    let eta = BrokenDiffeo::rotation(&p, 0.9);
    let psi = random_arrow(&mut r, eta.trg(), &spec()).unwrap();
    let phi = random_arrow(&mut r, psi.trg(), &spec()).unwrap();
    let res = groupoid_cocycle_residual(&phi, &psi, &eta, &q).unwrap();
    assert!(res.iter().all(|v| v.abs() < 1e-8));
}

#[test]
fn extended_multiplication_is_associative() {
    let mut r = rng(45);
    let q = QuadratureSpec::default();
    for n in 1..=3 {
        let (phi, psi, eta) = random_composable_triple(&mut r, n, &spec()).unwrap();
        let charge = |r: &mut rand_chacha::ChaCha8Rng| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>();
        let a = ExtendedDiffeo::new(phi.clone(), charge(&mut r)).unwrap();
        let b = ExtendedDiffeo::new(psi.clone(), charge(&mut r)).unwrap();
        let c = ExtendedDiffeo::new(eta.clone(), charge(&mut r)).unwrap();
        let left = a.multiply(&b, &q).unwrap().multiply(&c, &q).unwrap();
        let right = a.multiply(&b.multiply(&c, &q).unwrap(), &q).unwrap();
        let res = groupoid_cocycle_residual(&phi, &psi, &eta, &q).unwrap();
        for i in 0..n {
            let diff = right.charge[i] - left.charge[i];
            assert!(diff.abs() < 1e-8);
            assert!((diff - res[i]).abs() < 1e-12);
        }
        let unit = ExtendedDiffeo::identity(b.arrow.trg()).multiply(&b, &q).unwrap();
        assert_eq!(unit.charge, b.charge);
        let inv = a.inverse(&q).unwrap();
        let prod = a.multiply(&inv, &q).unwrap();
        assert!(prod.charge.iter().all(|c| c.abs() < 1e-10));
    }
}

#[test]
fn bott_relation_with_and_without_jumps() {
    let mut r = rng(46);
    let q = QuadratureSpec::default();
    let mut jumps = 0;
    for k in 0..10 {
        let n = 1 + k % 3;
        let p = random_config(&mut r, n, 0.6).unwrap();
        let psi = random_arrow(&mut r, &p, &spec()).unwrap();
        let phi = random_arrow(&mut r, psi.trg(), &spec()).unwrap();
        let b = bott_boundary_relation(&phi, &psi, &q).unwrap();
        assert!((b.lhs - b.rhs).abs() < 1e-7, "{b:?}");
        if b.boundary.abs() > 1e-6 {
            jumps += 1;
        }
    }
    assert!(jumps > 0);
    let p = BreakConfig::new(&[0.4, 2.0]).unwrap();
    let psi = BrokenDiffeo::from_lift(p, parse("x + 0.2*sin(x) + 0.05*cos(3*x)").unwrap()).unwrap();
    let phi = BrokenDiffeo::from_lift(psi.trg().clone(), parse("x + 0.1*sin(2*x + 1)").unwrap()).unwrap();
    let b = bott_boundary_relation(&phi, &psi, &q).unwrap();
    assert!(b.boundary.abs() < 1e-9);
    assert!((b.lhs - b.integral).abs() < 1e-8);
}

#[test]
fn bisection_composition_is_associative() {
    let a = Bisection::new(1, vec![parse("x + 0.2*sin(x - p1) + 0.1").unwrap()]).unwrap();
    let b = Bisection::new(1, vec![parse("x + 0.3*sin(x - p1)*cos(p1)").unwrap()]).unwrap();
    let c = Bisection::new(1, vec![parse("x - 0.15*sin(2*(x - p1)) + 0.2*sin(p1)").unwrap()]).unwrap();
    let left = a.compose(&b).unwrap().compose(&c).unwrap();
    let right = a.compose(&b.compose(&c).unwrap()).unwrap();
    let mut r = rng(47);
    for _ in 0..30 {
        let p = BreakConfig::new(&[r.gen_range(0.0..TWO_PI)]).unwrap();
        let x = r.gen_range(0.0..TWO_PI);
        assert!((left.value(x, &p).unwrap() - right.value(x, &p).unwrap()).abs() < 1e-8);
        // base maps compose
        let fc = c.base_map(&p).unwrap();
        let fbc = b.base_map(&BreakConfig::from_lift(fc).unwrap()).unwrap();
        let want = a.base_map(&BreakConfig::from_lift(fbc).unwrap()).unwrap();
        assert!((left.base_map(&p).unwrap()[0] - want[0]).abs() < 1e-9);
    }
}
