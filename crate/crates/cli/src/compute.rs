//! One-off evaluations on named scenario objects, and exact tables.

use std::collections::BTreeMap;

use bvir_core::algebroid::{bracket_sections, isotropy_bracket, omega_i, BrokenField, Section};
use bvir_core::geometry::{QuadratureSpec, TWO_PI};
use bvir_core::groupoid::chi_i;
use bvir_core::interval::{
    format_rational, nontriviality_certificate, omega_interval, rational_to_f64, sin_basis_omega, IntervalField,
    Verdict,
};
use bvir_core::linkage::flow;
use clap::ValueEnum;

use crate::report::{Check, Value};
use crate::scenario::Model;
use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Omega,
    Chi,
    Bracket,
    Anchor,
    Flow,
}

impl What {
    pub fn name(self) -> &'static str {
        match self {
            What::Omega => "omega",
            What::Chi => "chi",
            What::Bracket => "bracket",
            What::Anchor => "anchor",
            What::Flow => "flow",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            What::Omega | What::Bracket => &["u", "v", "arc"],
            What::Chi => &["phi", "psi", "arc"],
            What::Anchor => &["u"],
            What::Flow => &["field", "t", "points"],
        }
    }
}

/// `key=value` arguments of `compute`.
pub struct Args(BTreeMap<String, String>);

impl Args {
    pub fn parse(what: What, raw: &[String], arc: Option<usize>) -> Result<Args, UsageError> {
        let mut m = BTreeMap::new();
        for a in raw {
            let (k, v) = a.split_once('=').ok_or_else(|| UsageError(format!("expected key=value, got `{a}`")))?;
            let k = if k == "time" { "t" } else { k };
            if !what.keys().contains(&k) {
                return Err(UsageError(format!("`{}` takes {}, not `{k}`", what.name(), what.keys().join(", "))));
            }
            m.insert(k.to_string(), v.to_string());
        }
        if let Some(a) = arc {
            if !what.keys().contains(&"arc") {
                return Err(UsageError(format!("`{}` has no arc argument", what.name())));
            }
            m.insert("arc".into(), a.to_string());
        }
        Ok(Args(m))
    }

    fn get(&self, k: &str) -> Result<&str, UsageError> {
        self.0.get(k).map(String::as_str).ok_or_else(|| UsageError(format!("missing argument {k}=...")))
    }

    fn number<T: std::str::FromStr>(&self, k: &str) -> Result<Option<T>, UsageError> {
        self.0
            .get(k)
            .map(|s| s.parse::<T>().map_err(|_| UsageError(format!("{k}: cannot parse `{s}`"))))
            .transpose()
    }

    /// 0-based arc from the 1-based argument.
    fn arc(&self, n: usize) -> Result<Option<usize>, UsageError> {
        match self.number::<usize>("arc")? {
            Some(a) if a == 0 || a > n => Err(UsageError(format!("arc must lie in 1..={n}, got {a}"))),
            a => Ok(a.map(|a| a - 1)),
        }
    }
}

fn err(e: bvir_core::Error) -> String {
    e.to_string()
}

fn require_known(model: &Model, name: &str, field_or_section: bool) -> Result<(), UsageError> {
    let known = if field_or_section {
        model.fields.contains_key(name) || model.sections.contains_key(name)
    } else {
        model.diffeos.contains_key(name)
    };
    if known {
        Ok(())
    } else {
        let kind = if field_or_section { "field or section" } else { "diffeo" };
        Err(UsageError(format!("unknown {kind} `{name}`")))
    }
}

/// A field evaluated at the scenario breaks, or a section regarded as a
/// family over all configurations.
enum Operand<'a> {
    Field(&'a BrokenField),
    Section(&'a Section),
}

fn operand<'a>(model: &'a Model, name: &str) -> Result<Operand<'a>, String> {
    match model.fields.get(name) {
        Some(e) => e.get(name).map(Operand::Field),
        None => model.sections[name].get(name).map(Operand::Section),
    }
}

fn at_breaks(model: &Model, name: &str) -> Result<BrokenField, String> {
    let p = model.breaks.clone()?;
    match operand(model, name)? {
        Operand::Field(f) => Ok(f.clone()),
        Operand::Section(s) => s.at(&p).map_err(err),
    }
}

fn arcs(n: usize, arc: Option<usize>) -> Vec<usize> {
    match arc {
        Some(a) => vec![a],
        None => (0..n).collect(),
    }
}

pub fn run(model: &Model, what: What, args: &Args) -> Result<Vec<Check>, UsageError> {
    let n = model.n();
    let q = model.numerics.quad;
    let setting = format!("{what:?}|{:?}|{:?}", model.numerics, model.break_angles);
    match what {
        What::Omega => {
            let (u, v) = (args.get("u")?, args.get("v")?);
            require_known(model, u, true)?;
            require_known(model, v, true)?;
            let arc = args.arc(n)?;
            let key = format!("{setting}|{}|{}", field_desc(model, u), field_desc(model, v));
            Ok(arcs(n, arc)
                .into_iter()
                .map(|i| {
                    let c = Check::new(format!("omega_{}({u}, {v})", i + 1), format!("{key}|arc {i}"));
                    let r = (|| -> Result<f64, String> {
                        let p = model.breaks.clone()?;
                        let (fu, fv) = (at_breaks(model, u)?, at_breaks(model, v)?);
                        omega_i(&fu, &fv, &p, i, &q).map_err(err)
                    })();
                    match r {
                        Ok(x) => c.value("arc", Value::Int(i as i64 + 1)).real("omega", x),
                        Err(e) => c.fail(e),
                    }
                })
                .collect())
        }
        What::Chi => {
            let (phi, psi) = (args.get("phi")?, args.get("psi")?);
            require_known(model, phi, false)?;
            require_known(model, psi, false)?;
            let arc = args.arc(n)?;
            let key = format!("{setting}|{}|{}", model.diffeos[phi].description, model.diffeos[psi].description);
            Ok(arcs(n, arc)
                .into_iter()
                .map(|i| {
                    let c = Check::new(format!("chi_{}({phi}, {psi})", i + 1), format!("{key}|arc {i}"));
                    let r = (|| chi_i(model.diffeo(phi)?, model.diffeo(psi)?, i, &q).map_err(err))();
                    match r {
                        Ok(x) => c.value("arc", Value::Int(i as i64 + 1)).real("chi", x),
                        Err(e) => c.fail(e),
                    }
                })
                .collect())
        }
        What::Bracket => {
            let (u, v) = (args.get("u")?, args.get("v")?);
            require_known(model, u, true)?;
            require_known(model, v, true)?;
            let arc = args.arc(n)?;
            let key = format!("{setting}|{}|{}", field_desc(model, u), field_desc(model, v));
            let c = Check::new(format!("[{u}, {v}]"), key);
            let r = bracket_at_breaks(model, u, v);
            Ok(vec![match r {
                Ok(b) => {
                    let mut c = c;
                    for i in arcs(n, arc) {
                        c = c.value(&format!("piece_{}", i + 1), Value::Text(b.piece(i).to_string()));
                    }
                    match b.anchor() {
                        Ok(a) => c.value("anchor", Value::Vector(a)),
                        Err(e) => c.fail(err(e)),
                    }
                }
                Err(e) => c.fail(e),
            }])
        }
        What::Anchor => {
            let u = args.get("u")?;
            require_known(model, u, true)?;
            let c = Check::new(format!("anchor({u})"), format!("{setting}|{}", field_desc(model, u)));
            Ok(vec![match at_breaks(model, u).and_then(|f| f.anchor().map_err(err)) {
                Ok(a) => c.value("anchor", Value::Vector(a)),
                Err(e) => c.fail(e),
            }])
        }
        What::Flow => {
            let name = args.get("field")?;
            if !model.fields.contains_key(name) {
                return Err(UsageError(format!("unknown field `{name}`")));
            }
            let t: f64 = args.number("t")?.ok_or_else(|| UsageError("missing argument t=...".into()))?;
            let points: usize = args.number("points")?.unwrap_or(16);
            if points == 0 {
                return Err(UsageError("points must be positive".into()));
            }
            let key = format!("{setting}|{}|t {t:?}", model.fields[name].description);
            let arrow = model.field(name).and_then(|u| flow(u, t, &model.numerics.flow).map_err(err));
            let start = model.break_angles[0];
            Ok((0..points)
                .map(|k| {
                    let x = start + TWO_PI * k as f64 / points as f64;
                    let c = Check::new(format!("flow of {name} for t = {t} at x_{k}"), format!("{key}|x {x:?}"));
                    match arrow.as_ref().map_err(Clone::clone).and_then(|a| a.value(x).map_err(err)) {
                        Ok(y) => c.real("x", x).real("phi", y),
                        Err(e) => c.fail(e),
                    }
                })
                .collect())
        }
    }
}

fn field_desc(model: &Model, name: &str) -> String {
    match model.fields.get(name) {
        Some(e) => format!("field {}", e.description),
        None => format!("section {}", model.sections[name].description),
    }
}

/// Brackets of sections, or of fields vanishing at every break. Other fields
/// have no canonical extension to neighbouring configurations.
fn bracket_at_breaks(model: &Model, u: &str, v: &str) -> Result<BrokenField, String> {
    let p = model.breaks.clone()?;
    let family = |name: &str| -> Result<Option<Section>, String> {
        match operand(model, name)? {
            Operand::Section(s) => Ok(Some(s.clone())),
            Operand::Field(f) if f.pieces().len() == 1 => Section::global(model.n(), f.pieces()[0].clone()).map(Some).map_err(err),
            Operand::Field(_) => Ok(None),
        }
    };
    let (fu, fv) = (at_breaks(model, u)?, at_breaks(model, v)?);
    if fu.is_isotropic() && fv.is_isotropic() {
        return isotropy_bracket(&fu, &fv).map_err(err);
    }
    match (family(u)?, family(v)?) {
        (Some(a), Some(b)) => bracket_sections(&a, &b).and_then(|s| s.at(&p)).map_err(err),
        _ => Err("bracket needs sections, single-profile fields, or fields vanishing at every break".into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    SinBasisOmega,
    Certificate,
}

impl TableKind {
    pub fn name(self) -> &'static str {
        match self {
            TableKind::SinBasisOmega => "sin-basis-omega",
            TableKind::Certificate => "certificate",
        }
    }
}

pub const MAX_BOUND: u32 = 99;

pub fn table(kind: TableKind, bound: u32) -> Result<Vec<Check>, UsageError> {
    if bound > MAX_BOUND {
        return Err(UsageError(format!("bound must be at most {MAX_BOUND}, got {bound}")));
    }
    match kind {
        TableKind::SinBasisOmega => {
            if bound < 2 {
                return Err(UsageError(format!("bound must be at least 2, got {bound}")));
            }
            Ok(sin_table(bound))
        }
        TableKind::Certificate => {
            if bound < 5 || bound % 2 == 0 {
                return Err(UsageError(format!("certificate bound must be odd and at least 5, got {bound}")));
            }
            Ok(certificate_table(bound))
        }
    }
}

/// `1e-8`, widened to the rounding floor of an integrand of size `m n (m^2 + n^2)`
/// once that floor exceeds it (from about `m, n > 40`).
fn cross_check_tol(m: u32, n: u32) -> f64 {
    let (m, n) = (m as f64, n as f64);
    1e-8f64.max(8.0 * f64::EPSILON * m * n * (m * m + n * n))
}

/// Exact values for `1 <= m < n <= bound` against quadrature on `[0, pi]`.
fn sin_table(bound: u32) -> Vec<Check> {
    let q = QuadratureSpec::default();
    let mut out = Vec::new();
    for m in 1..=bound {
        for n in m + 1..=bound {
            let c = Check::new(format!("Omega(e_{m}, e_{n})"), format!("sin-basis-omega|{m}|{n}|{q:?}"))
                .value("m", Value::Int(m as i64))
                .value("n", Value::Int(n as i64));
            let r = (|| -> Result<(String, f64, f64), String> {
                let exact = sin_basis_omega(m, n).map_err(err)?;
                let (u, v) = (IntervalField::sin_basis(m).map_err(err)?, IntervalField::sin_basis(n).map_err(err)?);
                let quad = omega_interval(&u, &v, &q).map_err(err)?;
                Ok((format_rational(&exact), rational_to_f64(&exact), quad))
            })();
            out.push(match r {
                Ok((exact, approx, quad)) => {
                    let parity = if (m + n) % 2 == 0 { "zero" } else { "odd" };
                    c.value("exact", Value::Exact(exact))
                        .value("parity", Value::Text(parity.into()))
                        .real("quadrature", quad)
                        .measure(quad - approx, cross_check_tol(m, n))
                }
                Err(e) => c.fail(e),
            });
        }
    }
    out
}

fn certificate_table(bound: u32) -> Vec<Check> {
    let key = format!("certificate|{bound}");
    let c = match nontriviality_certificate(bound) {
        Ok(c) => c,
        Err(e) => return vec![Check::new("certificate", key).fail(err(e))],
    };
    let mut out = Vec::new();
    for (k, l) in &c.lambdas {
        out.push(
            Check::new(format!("lambda_{k}"), format!("{key}|lambda {k}"))
                .value("k", Value::Int(*k as i64))
                .value("lambda", Value::Exact(format_rational(l))),
        );
    }
    for row in &c.rows {
        // Nonzero residuals are the point of the certificate, so rows only record values.
        let mut r = Check::new(format!("row ({}, {})", row.k, row.l), format!("{key}|row {} {}", row.k, row.l))
            .value("k", Value::Int(row.k as i64))
            .value("l", Value::Int(row.l as i64))
            .value("lhs", Value::Exact(format_rational(&row.lhs)))
            .value("rhs", Value::Exact(format_rational(&row.rhs)));
        r.residual = Some(Value::Exact(format_rational(&row.residual)));
        out.push(r);
    }
    let verdict = c.verdict();
    let mut v = Check::new("verdict", format!("{key}|verdict")).value(
        "verdict",
        Value::Text(match verdict {
            Verdict::Valid => "VALID".into(),
            Verdict::Invalid => "INVALID".into(),
        }),
    );
    if let Some(w) = &c.witness {
        v = v
            .value("witness", Value::Text(format!("({}, {})", w.k, w.l)))
            .value("witness_residual", Value::Exact(format_rational(&w.residual)));
    }
    v.pass = verdict == Verdict::Valid;
    out.push(v);
    out
}
