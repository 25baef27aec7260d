//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bvir_core::algebroid::*;
use bvir_core::expr::parse;
use bvir_core::geometry::{BreakConfig, QuadratureSpec};
use bvir_core::groupoid::*;
use bvir_core::interval::*;
use bvir_core::linkage::*;
use bvir_core::sampling::*;
use bvir_core::Result;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn ac1() -> Result<Outcome> {
    let q = QuadratureSpec::default();
    let mut worst = 0.0f64;
    for m in 1..=10u32 {
        for n in m + 1..=10 {
            let exact = if (m + n) % 2 == 1 {
                let (m, n) = (m as f64, n as f64);
                2.0 * m * n * (m * m + n * n) / (m * m - n * n)
            } else {
                0.0
            };
            let table = rational_to_f64(&sin_basis_omega(m, n)?);
            let got = omega_interval(&IntervalField::sin_basis(m)?, &IntervalField::sin_basis(n)?, &q)?;
            worst = worst.max((got - exact).abs()).max((table - exact).abs());
        }
    }
    outcome(worst < 1e-8, format!("max deviation {worst:.3e} over 45 pairs"))
}

fn ac2() -> Result<Outcome> {
    let c = nontriviality_certificate(7)?;
    let lambda = |k| c.lambdas.iter().find(|(j, _)| *j == k).map(|(_, l)| *l);
    let row = c.rows.iter().find(|r| r.k == 5 && r.l == 3).copied();
    let pass = lambda(3) == Some(Rational::new(-20, 3))
        && lambda(5) == Some(Rational::new(-156, 5))
        && row.map(|r| r.residual) == Some(Rational::new(-768, 15))
        && c.verdict() == Verdict::Valid;
    let residual = row.map(|r| format_rational(&r.residual)).unwrap_or_default();
    outcome(pass, format!("verdict {:?}, residual(5,3) = {residual}", c.verdict()))
}

fn ac3() -> Result<Outcome> {
    let mut r = rng(3);
    let fd = FdSpec::default();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for k in 0..50 {
        let n = 1 + k % 3;
        let s: Vec<Section> = (0..3).map(|_| random_trig_section(&mut r, n, &TrigSpec::default())).collect::<Result<_>>()?;
        let p = random_config(&mut r, n, 0.5)?;
        for arc in 0..n {
            let form = ArcCocycle { arc, quad: QuadratureSpec::default() };
            worst = worst.max(algebroid_cocycle_residual(&form, &s[0], &s[1], &s[2], &p, &fd)?.abs());
            checks += 1;
        }
    }
    outcome(worst < 1e-5, format!("max residual {worst:.3e} over {checks} arc checks"))
}

fn ac4() -> Result<Outcome> {
    let mut r = rng(4);
    let q = QuadratureSpec::default();
    let spec = FlowSpec::default();
    let mut worst = 0.0f64;
    let mut signal = 0.0f64;
    for k in 0..30 {
        let (phi, psi, eta) = random_composable_triple(&mut r, 1 + k % 3, &spec)?;
        worst = worst.max(sup(&groupoid_cocycle_residual(&phi, &psi, &eta, &q)?));
        signal = signal.max(sup(&chi(&phi, &psi, &q)?));
    }
    outcome(worst < 1e-8 && signal > 1e-3, format!("max residual {worst:.3e}, max |chi| {signal:.3e}"))
}

fn ac5() -> Result<Outcome> {
    let spec = FlowSpec::default();
    let q = QuadratureSpec::default();
    let h = 1e-3;
    let p = BreakConfig::new(&[0.0, PI])?;
    let e1 = BrokenField::smooth(p.clone(), parse("sin(x)")?)?;
    let e2 = BrokenField::smooth(p.clone(), parse("sin(2*x)")?)?;
    let pinned = derive_algebroid_cocycle(&e1, &e2, &p, 0, h, &spec, &q)?;
    let pinned_err = (pinned + 20.0 / 3.0).abs();
    let mut r = rng(5);
    let fine_q = QuadratureSpec::with_tol(1e-13);
    let (mut ok, mut worst_excess, mut orders) = (pinned_err < 1e-3, 0.0f64, Vec::new());
    for k in 0..20 {
        let n = 1 + k % 3;
        let p = random_config(&mut r, n, 0.8)?;
        let u = random_isotropy_field(&mut r, &p, 3, 0.3)?;
        let v = random_isotropy_field(&mut r, &p, 3, 0.3)?;
        let arc = r.gen_range(0..n);
        let exact = omega_i(&u, &v, &p, arc, &q)?;
        let derived = derive_algebroid_cocycle(&u, &v, &p, arc, h, &spec, &q)?;
        let bound = (5.0 * h * h * exact.abs().max(1.0)).max(1e-3);
        worst_excess = worst_excess.max((derived - exact).abs() / bound);
        ok &= (derived - exact).abs() < bound;
        // At h = 1e-3 quadrature noise dominates the O(h^2) term, so the order is measured at larger steps.
        let c = convergence_order(&u, &v, &p, arc, 0.05, &spec, &fine_q)?;
        ok &= (1.7..=2.3).contains(&c.order);
        orders.push(c.order);
    }
    let (lo, hi) = orders.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
    outcome(
        ok,
        format!("pinned error {pinned_err:.3e}, worst error/bound {worst_excess:.3e}, orders in [{lo:.3}, {hi:.3}]"),
    )
}

fn ac6() -> Result<Outcome> {
    let mut r = rng(6);
    let q = QuadratureSpec::default();
    let spec = FlowSpec::default();
    let (mut worst, mut jumps) = (0.0f64, 0);
    for k in 0..16 {
        let p = random_config(&mut r, 1 + k % 3, 0.6)?;
        let psi = random_arrow(&mut r, &p, &spec)?;
        let phi = random_arrow(&mut r, psi.trg(), &spec)?;
        let b = bott_boundary_relation(&phi, &psi, &q)?;
        worst = worst.max((b.lhs - b.rhs).abs());
        jumps += (b.boundary.abs() > 1e-6) as usize;
    }
    // Smooth-derivative cases: global lifts with breaks that are only labels.
    let mut smooth_boundary = 0.0f64;
    for k in 0..4 {
        let p = random_config(&mut r, 1 + k % 3, 0.6)?;
        let a = r.gen_range(-0.3..0.3);
        let psi = BrokenDiffeo::from_lift(p, parse(&format!("x + {a}*sin(x + {k}) + 0.05*cos(2*x)"))?)?;
        let phi = BrokenDiffeo::from_lift(psi.trg().clone(), parse("x + 0.2*sin(x + 0.5)")?)?;
        let b = bott_boundary_relation(&phi, &psi, &q)?;
        worst = worst.max((b.lhs - b.rhs).abs());
        smooth_boundary = smooth_boundary.max(b.boundary.abs());
    }
    outcome(
        worst < 1e-7 && smooth_boundary < 1e-9 && jumps > 0,
        format!("max |lhs - rhs| {worst:.3e} over 20 pairs ({jumps} with jumps), smooth boundary sum {smooth_boundary:.3e}"),
    )
}

fn ac7() -> Result<Outcome> {
    let mut r = rng(7);
    let q = QuadratureSpec::default();
    let spec = FlowSpec::default();
    let mut worst = [0.0f64; 6];
    for n in 1..=3 {
        let trig = TrigSpec { degree: 3, ..TrigSpec::default() };
        let s: Vec<Section> = (0..3).map(|_| random_trig_section(&mut r, n, &trig)).collect::<Result<_>>()?;
        let f = parse(&format!("0.5*sin(p1) + cos(p{n})"))?;
        let leib_l = bracket_sections(&s[0], &s[1].scale_by(&f)?)?;
        let leib_r = bracket_sections(&s[0], &s[1])?.scale_by(&f)?;
        let lf = lie_derivative(&s[0], &f);
        let uv = bracket_sections(&s[0], &s[1])?;
        let vu = bracket_sections(&s[1], &s[0])?;
        let cyc = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];
        let iterated: Vec<Section> = cyc.iter().map(|&(a, b, c)| bracket_sections(&bracket_sections(&s[a], &s[b])?, &s[c])).collect::<Result<_>>()?;
        let embedded: Vec<EmbeddedField> = s.iter().map(embed_section).collect();
        let lie: Vec<EmbeddedField> = cyc.iter().map(|&(a, b, c)| embedded[a].lie_bracket(&embedded[b])?.lie_bracket(&embedded[c])).collect::<Result<_>>()?;
        let base = base_bracket(&s[0], &s[1]);
        for _ in 0..20 {
            let p = random_config(&mut r, n, 0.5)?;
            let (a, b) = p.arc(r.gen_range(0..n));
            let x = r.gen_range(a + 1e-3..b - 1e-3);
            let leibniz = leib_l.value(x, &p)? - leib_r.value(x, &p)? - eval_at(&lf, &p)? * s[1].value(x, &p)?;
            worst[0] = worst[0].max(leibniz.abs());
            worst[1] = worst[1].max((uv.value(x, &p)? + vu.value(x, &p)?).abs());
            let mut jac = 0.0;
            for k in 0..3 {
                let val = iterated[k].value(x, &p)?;
                jac += val;
                worst[2] = worst[2].max((val - lie[k].eval(x, &p)?[0]).abs() / val.abs().max(1.0));
            }
            worst[2] = worst[2].max(jac.abs());
            let anchor = uv.anchor(&p)?;
            for j in 0..n {
                worst[3] = worst[3].max((anchor[j] - eval_at(&base[j], &p)?).abs());
            }
        }
        let (phi, psi, eta) = random_composable_triple(&mut r, n, &spec)?;
        let inv = phi.inverse()?;
        let round = inv.compose(&phi)?;
        let unit = phi.compose(&BrokenDiffeo::identity(phi.src()))?;
        for k in 0..20 {
            let x = phi.src().lift()[0] + 0.3 * k as f64 + 1e-3;
            worst[4] = worst[4].max((round.value(x)? - x).abs()).max((unit.value(x)? - phi.value(x)?).abs());
        }
        let charge = |r: &mut rand_chacha::ChaCha8Rng| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>();
        let a = ExtendedDiffeo::new(phi, charge(&mut r))?;
        let b = ExtendedDiffeo::new(psi, charge(&mut r))?;
        let c = ExtendedDiffeo::new(eta, charge(&mut r))?;
        let left = a.multiply(&b, &q)?.multiply(&c, &q)?;
        let right = a.multiply(&b.multiply(&c, &q)?, &q)?;
        for i in 0..n {
            worst[5] = worst[5].max((left.charge[i] - right.charge[i]).abs());
        }
    }
    let names = ["leibniz", "antisymmetry", "jacobi", "anchor", "unit/inverse", "associativity"];
    let detail = names.iter().zip(&worst).map(|(n, w)| format!("{n} {w:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(worst.iter().all(|w| *w < 1e-8), detail)
}

fn ac8() -> Result<Outcome> {
    let mut r = rng(8);
    let q = QuadratureSpec::default();
    let (mut fixed, mut moving) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let (a, b) = (r.gen_range(-1.0..0.0), r.gen_range(0.5..2.0));
        let d: Vec<IntervalDiffeo> = (0..3).map(|_| random_interval_diffeo(&mut r, (a, b), (a, b), 3)).collect::<Result<_>>()?;
        fixed = fixed.max(interval_group_cocycle_residual(&d[0], &d[1], &d[2], &q)?.abs());
    }
    for _ in 0..10 {
        let ends: Vec<(f64, f64)> = (0..4).map(|_| {
            let a = r.gen_range(-1.0..1.0);
            (a, a + r.gen_range(0.5..2.5))
        }).collect();
        let eta = random_interval_diffeo(&mut r, ends[0], ends[1], 3)?;
        let psi = random_interval_diffeo(&mut r, ends[1], ends[2], 3)?;
        let phi = random_interval_diffeo(&mut r, ends[2], ends[3], 3)?;
        moving = moving.max(interval_group_cocycle_residual(&phi, &psi, &eta, &q)?.abs());
    }
    outcome(fixed < 1e-8 && moving < 1e-8, format!("fixed-endpoint {fixed:.3e}, moving-endpoint {moving:.3e}"))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, &'static str, fn() -> Result<Outcome>, Duration);
    let criteria: [Criterion; 8] = [
        ("AC1", "sin-basis cocycle table", ac1, Duration::from_secs(10)),
        ("AC2", "non-triviality certificate", ac2, Duration::from_secs(1)),
        ("AC3", "algebroid cocycle identity", ac3, Duration::from_secs(120)),
        ("AC4", "groupoid cocycle identity", ac4, Duration::from_secs(120)),
        ("AC5", "groupoid to algebroid linkage", ac5, Duration::from_secs(300)),
        ("AC6", "boundary-corrected Bott relation", ac6, Duration::from_secs(120)),
        ("AC7", "structure axioms", ac7, Duration::from_secs(120)),
        ("AC8", "interval group cocycle", ac8, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as usize;
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {name}: {detail} ({:.2} s, budget {} s)", elapsed.as_secs_f64(), budget.as_secs());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
