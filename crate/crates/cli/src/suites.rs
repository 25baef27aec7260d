//! Verification suites: seeded random inputs followed by the scenario's pinned inputs.

use bvir_core::algebroid::{
    algebroid_cocycle_residual, bracket_sections, embed_section, extended_jacobi_residual, omega_i, ArcCocycle,
    BaseFunction, ExtendedSection, Section,
};
use bvir_core::expr::{parse, Expression};
use bvir_core::geometry::{BreakConfig, QuadratureSpec, TWO_PI};
use bvir_core::groupoid::{bott_boundary_relation, chi, groupoid_cocycle_residual, BrokenDiffeo};
use bvir_core::interval::{interval_algebra_cocycle_residual, interval_group_cocycle_residual};
use bvir_core::linkage::{convergence_order, derive_algebroid_cocycle};
use bvir_core::sampling::{
    random_arrow, random_composable_triple, random_config, random_interval_diffeo, random_interval_field,
    random_isotropy_field, random_trig_section, rng, TrigSpec,
};
use clap::ValueEnum;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::report::{Check, Value, Values};
use crate::scenario::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    AlgebroidCocycle,
    GroupoidCocycle,
    Jacobi,
    BottBoundary,
    Linkage,
    IntervalCocycle,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::AlgebroidCocycle => "algebroid-cocycle",
            Suite::GroupoidCocycle => "groupoid-cocycle",
            Suite::Jacobi => "jacobi",
            Suite::BottBoundary => "bott-boundary",
            Suite::Linkage => "linkage",
            Suite::IntervalCocycle => "interval-cocycle",
        }
    }

    fn default_samples(self) -> usize {
        match self {
            Suite::Linkage => 3,
            Suite::Jacobi => 5,
            _ => 10,
        }
    }
}

pub struct Ctx<'a> {
    pub model: &'a Model,
    pub suite: Suite,
    pub seed: u64,
    pub tol: Option<f64>,
}

impl Ctx<'_> {
    fn tol(&self, default: f64) -> f64 {
        self.tol.or(self.model.numerics.tolerance).unwrap_or(default)
    }

    fn overridden(&self) -> bool {
        self.tol.is_some() || self.model.numerics.tolerance.is_some()
    }

    pub fn samples(&self) -> usize {
        self.model.numerics.samples.unwrap_or(self.suite.default_samples())
    }

    fn quad(&self) -> QuadratureSpec {
        self.model.numerics.quad
    }

    /// Digest input shared by every check: suite, seed and numerical settings.
    fn key(&self, rest: &str) -> String {
        format!("{}|seed {}|{:?}|{rest}", self.suite.name(), self.seed, self.model.numerics)
    }

    pub fn environment(&self) -> Values {
        let n = &self.model.numerics;
        Values(vec![
            ("seed".into(), Value::Int(self.seed as i64)),
            ("samples".into(), Value::Int(self.samples() as i64)),
            ("quadrature_abs_tol".into(), Value::Real(n.quad.abs_tol)),
            ("quadrature_max_depth".into(), Value::Int(n.quad.max_depth as i64)),
            ("fd_step".into(), Value::Real(n.fd.h)),
            ("fd_richardson".into(), Value::Bool(n.fd.richardson)),
            ("flow_steps_per_unit".into(), Value::Int(n.flow.steps_per_unit as i64)),
            ("break_count".into(), Value::Int(self.model.n() as i64)),
            ("version".into(), Value::Text(env!("CARGO_PKG_VERSION").into())),
        ])
    }
}

fn err(e: bvir_core::Error) -> String {
    e.to_string()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

pub fn run(ctx: &Ctx) -> Vec<Check> {
    let mut out = constructions(ctx);
    let r = &mut rng(ctx.seed);
    match ctx.suite {
        Suite::AlgebroidCocycle => algebroid(ctx, r, &mut out),
        Suite::GroupoidCocycle => groupoid(ctx, r, &mut out),
        Suite::Jacobi => jacobi(ctx, r, &mut out),
        Suite::BottBoundary => bott(ctx, r, &mut out),
        Suite::Linkage => linkage(ctx, r, &mut out),
        Suite::IntervalCocycle => interval(ctx, r, &mut out),
    }
    out
}

fn constructions(ctx: &Ctx) -> Vec<Check> {
    ctx.model
        .constructions()
        .into_iter()
        .map(|(kind, name, desc, error)| {
            let c = Check::new(format!("construct {kind} {name}"), ctx.key(&desc)).value("object", Value::Text(desc));
            match error {
                Some(e) => c.fail(e),
                None => c,
            }
        })
        .collect()
}

fn pinned_config(ctx: &Ctx) -> Result<BreakConfig, String> {
    ctx.model.breaks.clone().map_err(|e| format!("scenario breaks are invalid: {e}"))
}

/// Index triples over the first four items: all distinct triples, or a
/// padded one when fewer than three items exist.
fn triples(len: usize) -> Vec<[usize; 3]> {
    let m = len.min(4);
    if m == 0 {
        return Vec::new();
    }
    if m < 3 {
        return vec![[0, 1 % m, 0]];
    }
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                out.push([i, j, k]);
            }
        }
    }
    out
}

fn algebroid(ctx: &Ctx, r: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let tol = ctx.tol(1e-5);
    let fd = ctx.model.numerics.fd;
    for k in 0..ctx.samples() {
        let n = 1 + k % 3;
        let drawn = (|| -> Result<(Vec<Section>, BreakConfig), String> {
            let s = (0..3).map(|_| random_trig_section(r, n, &TrigSpec::default())).collect::<Result<Vec<_>, _>>().map_err(err)?;
            Ok((s, random_config(r, n, 0.5).map_err(err)?))
        })();
        for arc in 0..n {
            let c = Check::new(format!("random sections {k} (n = {n}) arc {}", arc + 1), ctx.key(&format!("sample {k} arc {arc}")));
            let res = drawn.as_ref().map_err(Clone::clone).and_then(|(s, p)| {
                let form = ArcCocycle { arc, quad: ctx.quad() };
                algebroid_cocycle_residual(&form, &s[0], &s[1], &s[2], p, &fd).map_err(err)
            });
            out.push(match res {
                Ok(v) => c.measure(v, tol),
                Err(e) => c.fail(e),
            });
        }
    }
    let items = ctx.model.section_like();
    let p = pinned_config(ctx);
    for t in triples(items.len()) {
        let names = t.map(|i| items[i].0.as_str());
        let desc = t.map(|i| items[i].1.as_str()).join(" ; ");
        for arc in 0..ctx.model.n() {
            let c = Check::new(format!("pinned ({}) arc {}", names.join(", "), arc + 1), ctx.key(&format!("pinned {desc} arc {arc}")));
            let res = (|| -> Result<f64, String> {
                let s = t.iter().map(|&i| items[i].2.clone()).collect::<Result<Vec<_>, _>>()?;
                let form = ArcCocycle { arc, quad: ctx.quad() };
                algebroid_cocycle_residual(&form, &s[0], &s[1], &s[2], p.as_ref().map_err(Clone::clone)?, &fd).map_err(err)
            })();
            out.push(match res {
                Ok(v) => c.measure(v, tol),
                Err(e) => c.fail(e),
            });
        }
    }
}

fn groupoid_check(ctx: &Ctx, c: Check, arrows: Result<[&BrokenDiffeo; 3], String>, tol: f64) -> Check {
    let res = arrows.and_then(|[phi, psi, eta]| {
        let q = ctx.quad();
        let res = groupoid_cocycle_residual(phi, psi, eta, &q).map_err(err)?;
        let x = chi(phi, psi, &q).map_err(err)?;
        Ok((res, x))
    });
    match res {
        Ok((res, x)) => c.value("components", Value::Vector(res.clone())).value("chi_phi_psi", Value::Vector(x)).measure(sup(&res), tol),
        Err(e) => c.fail(e),
    }
}

fn groupoid(ctx: &Ctx, r: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let tol = ctx.tol(1e-8);
    let spec = ctx.model.numerics.flow;
    for k in 0..ctx.samples() {
        let n = 1 + k % 3;
        let c = Check::new(format!("random triple {k} (n = {n})"), ctx.key(&format!("sample {k}")));
        let t = random_composable_triple(r, n, &spec).map_err(err);
        out.push(match &t {
            Ok((a, b, e)) => groupoid_check(ctx, c, Ok([a, b, e]), tol),
            Err(e) => c.fail(e),
        });
    }
    for t in &ctx.model.file.triples {
        let desc = t.iter().map(|s| ctx.model.diffeos[s].description.as_str()).collect::<Vec<_>>().join(" ; ");
        let c = Check::new(format!("pinned ({})", t.join(", ")), ctx.key(&desc));
        let arrows = (|| Ok([ctx.model.diffeo(&t[0])?, ctx.model.diffeo(&t[1])?, ctx.model.diffeo(&t[2])?]))();
        out.push(groupoid_check(ctx, c, arrows, tol));
    }
}

fn jacobi(ctx: &Ctx, r: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let spec = TrigSpec { degree: 3, ..TrigSpec::default() };
    for k in 0..ctx.samples() {
        let n = 1 + k % 3;
        let drawn = (0..3).map(|_| random_trig_section(r, n, &spec)).collect::<Result<Vec<_>, _>>().map_err(err);
        let points = sample_points(r, n, 10);
        let key = ctx.key(&format!("sample {k}"));
        match drawn {
            Ok(s) => {
                out.extend(jacobi_checks(ctx, &format!("random sections {k} (n = {n})"), &key, &s, &points));
                let central: Vec<Vec<BaseFunction>> = (0..3)
                    .map(|_| (0..n).map(|j| BaseFunction::from(trig_base(r, j))).collect())
                    .collect();
                let coeffs: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
                let p = random_config(r, n, 0.6);
                let c = Check::new(format!("extended jacobi {k} (n = {n})"), format!("{key}|extended"));
                let res = (|| -> Result<Vec<f64>, String> {
                    let e = s
                        .iter()
                        .zip(central)
                        .map(|(s, c)| ExtendedSection::new(s.clone(), c))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(err)?;
                    let p = p.map_err(err)?;
                    extended_jacobi_residual(&e[0], &e[1], &e[2], &coeffs, &p, &ctx.quad(), ctx.model.numerics.fd).map_err(err)
                })();
                out.push(match res {
                    Ok(v) => c.value("components", Value::Vector(v.clone())).measure(sup(&v), ctx.tol(1e-5)),
                    Err(e) => c.fail(e),
                });
            }
            Err(e) => out.push(Check::new(format!("random sections {k} (n = {n})"), key).fail(e)),
        }
    }
    let items = ctx.model.section_like();
    let Ok(p) = pinned_config(ctx) else { return };
    let n = ctx.model.n();
    let points: Vec<(f64, BreakConfig)> = (0..n)
        .flat_map(|i| {
            let (a, b) = p.arc(i);
            let p = p.clone();
            (1..=5).map(move |k| (a + (b - a) * k as f64 / 6.0, p.clone()))
        })
        .collect();
    for t in triples(items.len()) {
        let names = t.map(|i| items[i].0.as_str()).join(", ");
        let desc = t.map(|i| items[i].1.as_str()).join(" ; ");
        let key = ctx.key(&format!("pinned {desc}"));
        match t.iter().map(|&i| items[i].2.clone()).collect::<Result<Vec<_>, _>>() {
            Ok(s) => out.extend(jacobi_checks(ctx, &format!("pinned ({names})"), &key, &s, &points)),
            Err(e) => out.push(Check::new(format!("pinned ({names})"), key).fail(e)),
        }
    }
}

fn trig_base(r: &mut ChaCha8Rng, j: usize) -> Expression {
    let (a, b) = (r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5));
    parse(&format!("{a}*sin(p{}) + {b}*cos(2*p{})", j + 1, j + 1)).expect("generated expression parses")
}

fn sample_points(r: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<(f64, BreakConfig)> {
    (0..count)
        .filter_map(|_| {
            let p = random_config(r, n, 0.5).ok()?;
            let (a, b) = p.arc(r.gen_range(0..n));
            Some((r.gen_range(a + 1e-3..b - 1e-3), p))
        })
        .collect()
}

/// Jacobi sum of iterated section brackets, and agreement of the brackets with
/// Lie brackets of the embedded fields.
fn jacobi_checks(ctx: &Ctx, label: &str, key: &str, s: &[Section], points: &[(f64, BreakConfig)]) -> Vec<Check> {
    let cyc = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];
    let res = (|| -> Result<(f64, f64), String> {
        let iterated = cyc
            .iter()
            .map(|&(a, b, c)| bracket_sections(&bracket_sections(&s[a], &s[b])?, &s[c]))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let e: Vec<_> = s.iter().map(embed_section).collect();
        let lie = cyc
            .iter()
            .map(|&(a, b, c)| e[a].lie_bracket(&e[b])?.lie_bracket(&e[c]))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let (mut jac, mut emb) = (0.0f64, 0.0f64);
        for (x, p) in points {
            let mut sum = 0.0;
            for k in 0..3 {
                let a = iterated[k].value(*x, p).map_err(err)?;
                let b = lie[k].eval(*x, p).map_err(err)?[0];
                emb = emb.max((a - b).abs() / a.abs().max(1.0));
                sum += a;
            }
            jac = jac.max(sum.abs());
        }
        Ok((jac, emb))
    })();
    let jc = Check::new(format!("{label} jacobi"), format!("{key}|jacobi"));
    let ec = Check::new(format!("{label} embedding"), format!("{key}|embedding"));
    match res {
        Ok((j, e)) => vec![jc.measure(j, ctx.tol(1e-8)), ec.measure(e, ctx.tol(1e-8))],
        Err(e) => vec![jc.fail(&e), ec.fail(e)],
    }
}

fn bott_check(ctx: &Ctx, c: Check, pair: Result<[&BrokenDiffeo; 2], String>, tol: f64, smooth: bool) -> Check {
    let res = pair.and_then(|[phi, psi]| bott_boundary_relation(phi, psi, &ctx.quad()).map_err(err));
    match res {
        Ok(b) => {
            let c = c.real("lhs", b.lhs).real("rhs", b.rhs).real("integral", b.integral).real("boundary", b.boundary);
            if smooth {
                c.measure(b.boundary.abs().max((b.lhs - b.integral).abs()), ctx.tol(1e-8))
            } else {
                c.measure(b.lhs - b.rhs, tol)
            }
        }
        Err(e) => c.fail(e),
    }
}

fn random_lift(r: &mut ChaCha8Rng) -> Expression {
    let (a, b) = (r.gen_range(-0.3..0.3), r.gen_range(-0.15..0.15));
    let (s, t) = (r.gen_range(0.0..TWO_PI), r.gen_range(0.0..TWO_PI));
    parse(&format!("x + {a}*sin(x + {s}) + {b}*cos(2*x + {t})")).expect("generated expression parses")
}

fn bott(ctx: &Ctx, r: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let tol = ctx.tol(1e-7);
    let spec = ctx.model.numerics.flow;
    for k in 0..ctx.samples() {
        let n = 1 + k % 3;
        let c = Check::new(format!("random pair {k} (n = {n})"), ctx.key(&format!("sample {k}")));
        let pair = (|| -> Result<_, bvir_core::Error> {
            let p = random_config(r, n, 0.6)?;
            let psi = random_arrow(r, &p, &spec)?;
            let phi = random_arrow(r, psi.trg(), &spec)?;
            Ok((phi, psi))
        })()
        .map_err(err);
        out.push(match &pair {
            Ok((phi, psi)) => bott_check(ctx, c, Ok([phi, psi]), tol, false),
            Err(e) => c.fail(e),
        });
        // Globally smooth arrows have no boundary term.
        let c = Check::new(format!("random smooth pair {k} (n = {n})"), ctx.key(&format!("smooth sample {k}")));
        let pair = (|| -> Result<_, bvir_core::Error> {
            let p = random_config(r, n, 0.6)?;
            let psi = BrokenDiffeo::from_lift(p, random_lift(r))?;
            let phi = BrokenDiffeo::from_lift(psi.trg().clone(), random_lift(r))?;
            Ok((phi, psi))
        })()
        .map_err(err);
        out.push(match &pair {
            Ok((phi, psi)) => bott_check(ctx, c, Ok([phi, psi]), tol, true),
            Err(e) => c.fail(e),
        });
    }
    for t in &ctx.model.file.pairs {
        let desc = t.iter().map(|s| ctx.model.diffeos[s].description.as_str()).collect::<Vec<_>>().join(" ; ");
        let c = Check::new(format!("pinned ({})", t.join(", ")), ctx.key(&desc));
        let pair = (|| Ok([ctx.model.diffeo(&t[0])?, ctx.model.diffeo(&t[1])?]))();
        out.push(bott_check(ctx, c, pair, tol, false));
    }
}

const LINKAGE_H: f64 = 1e-3;

fn linkage(ctx: &Ctx, r: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let spec = ctx.model.numerics.flow;
    let q = ctx.quad();
    for (k, l) in ctx.model.file.linkage.iter().enumerate() {
        let h = l.h.unwrap_or(LINKAGE_H);
        let arc = l.arc - 1;
        let desc = format!(
            "u {} ; v {} ; arc {} ; h {h:?}",
            ctx.model.fields[&l.u].description, ctx.model.fields[&l.v].description, l.arc
        );
        let label = format!("pinned linkage {k} ({}, {}) arc {}", l.u, l.v, l.arc);
        let res = (|| -> Result<(f64, f64), String> {
            let (u, v) = (ctx.model.field(&l.u)?, ctx.model.field(&l.v)?);
            let exact = omega_i(u, v, u.breaks(), arc, &q).map_err(err)?;
            let derived = derive_algebroid_cocycle(u, v, u.breaks(), arc, h, &spec, &q).map_err(err)?;
            Ok((exact, derived))
        })();
        let c = Check::new(label.clone(), ctx.key(&desc));
        match res {
            Ok((exact, derived)) => {
                out.push(c.real("h", h).real("omega", exact).real("derived", derived).measure(derived - exact, ctx.tol(1e-3)));
                if let Some(e) = &l.expected {
                    let want = e.value().expect("validated on load");
                    let c = Check::new(format!("{label} expected value"), ctx.key(&format!("{desc} ; expected {want:?}")));
                    out.push(c.real("omega", exact).real("expected", want).measure(exact - want, ctx.tol(1e-8)));
                }
            }
            Err(e) => out.push(c.fail(e)),
        }
    }
    for k in 0..ctx.samples() {
        let n = 1 + k % 3;
        let arc = k % n;
        let c = Check::new(format!("random isotropy pair {k} (n = {n}) arc {}", arc + 1), ctx.key(&format!("sample {k}")));
        let res = (|| -> Result<_, bvir_core::Error> {
            let p = random_config(r, n, 0.6)?;
            let u = random_isotropy_field(r, &p, 3, 0.5)?;
            let v = random_isotropy_field(r, &p, 3, 0.5)?;
            let exact = omega_i(&u, &v, &p, arc, &q)?;
            let derived = derive_algebroid_cocycle(&u, &v, &p, arc, LINKAGE_H, &spec, &q)?;
            Ok((u, v, p, exact, derived))
        })();
        match res {
            Ok((u, v, p, exact, derived)) => {
                let bound = ctx.tol(1e-3f64.max(5.0 * LINKAGE_H * LINKAGE_H * exact.abs().max(1.0)));
                out.push(c.real("h", LINKAGE_H).real("omega", exact).real("derived", derived).measure(derived - exact, bound));
                if k == 0 {
                    out.push(order_check(ctx, &u, &v, &p, arc, k));
                }
            }
            Err(e) => out.push(c.fail(err(e))),
        }
    }
}

/// Observed order of the mixed difference. The step is large enough that the
/// O(h^2) error dominates quadrature noise.
fn order_check(ctx: &Ctx, u: &bvir_core::algebroid::BrokenField, v: &bvir_core::algebroid::BrokenField, p: &BreakConfig, arc: usize, k: usize) -> Check {
    let h = 0.05;
    let q = QuadratureSpec::with_tol(1e-13);
    let c = Check::new(format!("random isotropy pair {k} convergence order"), ctx.key(&format!("sample {k} order h {h:?}")));
    match convergence_order(u, v, p, arc, h, &ctx.model.numerics.flow, &q) {
        Ok(e) => {
            let tol = if ctx.overridden() { ctx.tol(0.3) } else { 0.3 };
            c.real("h", h).real("coarse_error", e.coarse - e.exact).real("fine_error", e.fine - e.exact).real("order", e.order).measure(e.order - 2.0, tol)
        }
        Err(e) => c.fail(err(e)),
    }
}

fn interval(ctx: &Ctx, r: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let tol = ctx.tol(1e-8);
    let q = ctx.quad();
    for k in 0..ctx.samples() {
        let (a, b) = (r.gen_range(-1.0..0.0), r.gen_range(0.5..2.0));
        let c = Check::new(format!("random fixed-endpoint triple {k}"), ctx.key(&format!("fixed sample {k}")));
        let res = (|| -> Result<f64, bvir_core::Error> {
            let d = (0..3).map(|_| random_interval_diffeo(r, (a, b), (a, b), 3)).collect::<Result<Vec<_>, _>>()?;
            interval_group_cocycle_residual(&d[0], &d[1], &d[2], &q)
        })();
        out.push(match res {
            Ok(v) => c.measure(v, tol),
            Err(e) => c.fail(err(e)),
        });
    }
    for k in 0..ctx.samples().div_ceil(2) {
        let c = Check::new(format!("random segment triple {k}"), ctx.key(&format!("segment sample {k}")));
        let res = (|| -> Result<f64, bvir_core::Error> {
            let i0 = (r.gen_range(-1.0..0.0), r.gen_range(0.5..1.5));
            let i1 = (r.gen_range(-1.0..1.0), r.gen_range(1.5..3.0));
            let i2 = (r.gen_range(0.0..1.0), r.gen_range(2.0..2.5));
            let i3 = (r.gen_range(-2.0..-1.0), r.gen_range(0.0..1.0));
            let eta = random_interval_diffeo(r, i0, i1, 3)?;
            let psi = random_interval_diffeo(r, i1, i2, 3)?;
            let phi = random_interval_diffeo(r, i2, i3, 3)?;
            interval_group_cocycle_residual(&phi, &psi, &eta, &q)
        })();
        out.push(match res {
            Ok(v) => c.measure(v, tol),
            Err(e) => c.fail(err(e)),
        });
    }
    for k in 0..ctx.samples().div_ceil(2) {
        let c = Check::new(format!("random field triple {k}"), ctx.key(&format!("field sample {k}")));
        let res = (|| -> Result<f64, bvir_core::Error> {
            let (a, b) = (r.gen_range(-1.0..0.0), r.gen_range(0.5..2.0));
            let f = (0..3).map(|_| random_interval_field(r, a, b, 4, 1.0)).collect::<Result<Vec<_>, _>>()?;
            interval_algebra_cocycle_residual(&f[0], &f[1], &f[2], &q)
        })();
        out.push(match res {
            Ok(v) => c.measure(v, tol),
            Err(e) => c.fail(err(e)),
        });
    }
    let m = ctx.model;
    let Some(iv) = &m.file.interval else { return };
    for t in &iv.triples {
        let desc = t.iter().map(|s| m.interval_diffeos[s].description.as_str()).collect::<Vec<_>>().join(" ; ");
        let c = Check::new(format!("pinned ({})", t.join(", ")), ctx.key(&desc));
        let res = (|| -> Result<f64, String> {
            let (phi, psi, eta) = (m.interval_diffeo(&t[0])?, m.interval_diffeo(&t[1])?, m.interval_diffeo(&t[2])?);
            interval_group_cocycle_residual(phi, psi, eta, &q).map_err(err)
        })();
        out.push(match res {
            Ok(v) => c.measure(v, tol),
            Err(e) => c.fail(e),
        });
    }
    for t in &iv.field_triples {
        let desc = t.iter().map(|s| m.interval_fields[s].description.as_str()).collect::<Vec<_>>().join(" ; ");
        let c = Check::new(format!("pinned fields ({})", t.join(", ")), ctx.key(&desc));
        let res = (|| -> Result<f64, String> {
            let (u, v, w) = (m.interval_field(&t[0])?, m.interval_field(&t[1])?, m.interval_field(&t[2])?);
            interval_algebra_cocycle_residual(u, v, w, &q).map_err(err)
        })();
        out.push(match res {
            Ok(v) => c.measure(v, tol),
            Err(e) => c.fail(e),
        });
    }
}
