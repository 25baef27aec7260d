//! Scenario documents: named fields, sections and arrows over one break
//! configuration, plus optional interval objects and numerical settings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use bvir_core::algebroid::{BrokenField, Domain, FdSpec, Section};
use bvir_core::expr::{evaluate, parse, Binding, Expression, Var};
use bvir_core::geometry::{BreakConfig, QuadratureSpec};
use bvir_core::groupoid::BrokenDiffeo;
use bvir_core::interval::{IntervalDiffeo, IntervalField};
use bvir_core::linkage::{flow, FlowSpec};
use serde::Deserialize;

/// Problems with the document itself. These map to exit code 2.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scenario: {}", self.0)
    }
}

impl std::error::Error for SchemaError {}

fn schema<T>(msg: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError(msg.into()))
}

/// A number, or a constant expression such as `"pi/2"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Number(f64),
    Expr(String),
}

impl Real {
    pub fn value(&self) -> Result<f64, SchemaError> {
        match self {
            Real::Number(x) => Ok(*x),
            Real::Expr(s) => {
                let e = parse(s).map_err(|e| SchemaError(format!("`{s}`: {e}")))?;
                evaluate(&e, &Binding::new()).map_err(|e| SchemaError(format!("`{s}` is not a constant: {e}")))
            }
        }
    }
}

/// One expression for every arc, or one per arc.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Pieces {
    One(String),
    Many(Vec<String>),
}

impl Pieces {
    fn strings(&self) -> Vec<String> {
        match self {
            Pieces::One(s) => vec![s.clone()],
            Pieces::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffeoSpec {
    pub lift: Option<String>,
    pub pieces: Option<Vec<String>>,
    pub rotation: Option<Real>,
    pub identity: Option<bool>,
    /// Name of a field whose time-`time` flow is the arrow.
    pub flow: Option<String>,
    pub time: Option<Real>,
    /// `[a, b, c]` means `a o b o c`.
    pub compose: Option<Vec<String>>,
    pub inverse: Option<String>,
    /// Source configuration for `lift`, `pieces`, `rotation` and `identity`.
    pub source: Option<Vec<Real>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkageSpec {
    pub u: String,
    pub v: String,
    /// 1-based.
    pub arc: usize,
    pub h: Option<f64>,
    pub expected: Option<Real>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalFieldSpec {
    pub a: Real,
    pub b: Real,
    pub profile: String,
    #[serde(default = "yes")]
    pub vanishing: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalDiffeoSpec {
    pub a: Real,
    pub b: Real,
    pub map: String,
    #[serde(default)]
    pub fixed: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    #[serde(default)]
    pub fields: BTreeMap<String, IntervalFieldSpec>,
    #[serde(default)]
    pub diffeos: BTreeMap<String, IntervalDiffeoSpec>,
    /// Arrow triples `(phi, psi, eta)`.
    #[serde(default)]
    pub triples: Vec<[String; 3]>,
    #[serde(default)]
    pub field_triples: Vec<[String; 3]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverride {
    pub abs_tol: Option<f64>,
    pub max_depth: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default)]
    pub quadrature: QuadratureOverride,
    pub fd_step: Option<f64>,
    pub flow_steps_per_unit: Option<u32>,
    /// Replaces every default tolerance; `--tol` takes precedence.
    pub tolerance: Option<f64>,
    /// Randomized inputs per suite.
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub breaks: Vec<Real>,
    #[serde(default)]
    pub fields: BTreeMap<String, Pieces>,
    /// Expressions in `x` and `p1..pn`.
    #[serde(default)]
    pub sections: BTreeMap<String, Pieces>,
    #[serde(default)]
    pub diffeos: BTreeMap<String, DiffeoSpec>,
    #[serde(default)]
    pub triples: Vec<[String; 3]>,
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    #[serde(default)]
    pub linkage: Vec<LinkageSpec>,
    pub interval: Option<IntervalSpec>,
    #[serde(default)]
    pub settings: Settings,
}

/// A scenario object: a canonical description (hashed into reports) and the
/// constructed value or the construction error.
#[derive(Debug, Clone)]
pub struct Entry<T> {
    pub kind: &'static str,
    pub description: String,
    pub value: Result<T, String>,
}

impl<T> Entry<T> {
    pub fn get(&self, name: &str) -> Result<&T, String> {
        self.value.as_ref().map_err(|e| format!("{} `{name}` is unavailable: {e}", self.kind))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Numerics {
    pub quad: QuadratureSpec,
    pub fd: FdSpec,
    pub flow: FlowSpec,
    pub tolerance: Option<f64>,
    pub samples: Option<usize>,
}

pub struct Model {
    /// The document as read, hashed into reports.
    pub text: String,
    pub breaks: Result<BreakConfig, String>,
    pub break_angles: Vec<f64>,
    pub fields: BTreeMap<String, Entry<BrokenField>>,
    pub sections: BTreeMap<String, Entry<Section>>,
    pub diffeos: BTreeMap<String, Entry<BrokenDiffeo>>,
    pub interval_fields: BTreeMap<String, Entry<IntervalField>>,
    pub interval_diffeos: BTreeMap<String, Entry<IntervalDiffeo>>,
    pub file: ScenarioFile,
    pub numerics: Numerics,
}

fn parse_expr(what: &str, s: &str, allowed: impl Fn(Var) -> bool) -> Result<Expression, SchemaError> {
    let e = parse(s).map_err(|e| SchemaError(format!("{what}: `{s}`: {e}")))?;
    if let Some(v) = e.free_vars().into_iter().find(|v| !allowed(*v)) {
        return schema(format!("{what}: `{s}` uses variable {v}"));
    }
    Ok(e)
}

fn reals(what: &str, v: &[Real]) -> Result<Vec<f64>, SchemaError> {
    v.iter().map(|r| r.value().map_err(|e| SchemaError(format!("{what}: {}", e.0)))).collect()
}

fn describe_pieces(pieces: &[Expression]) -> String {
    pieces.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" | ")
}

fn config(angles: &[f64]) -> Result<BreakConfig, String> {
    BreakConfig::new(angles).map_err(|e| e.to_string())
}

impl Model {
    pub fn load(path: &Path) -> Result<Model, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|e| SchemaError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Model, SchemaError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| SchemaError(e.to_string()))?;
        let break_angles = reals("breaks", &file.breaks)?;
        let n = break_angles.len();
        if n == 0 || n > bvir_core::expr::MAX_PARAMS {
            return schema(format!("breaks: expected 1..={} angles, got {n}", bvir_core::expr::MAX_PARAMS));
        }
        let numerics = numerics(&file.settings)?;
        let breaks = config(&break_angles);
        let only_x = |v: Var| v == Var::X;
        let x_and_p = |v: Var| matches!(v, Var::X) || matches!(v, Var::P(k) if (k as usize) <= n);
        let mut model = Model {
            text: text.to_string(),
            breaks: breaks.clone(),
            break_angles,
            fields: BTreeMap::new(),
            sections: BTreeMap::new(),
            diffeos: BTreeMap::new(),
            interval_fields: BTreeMap::new(),
            interval_diffeos: BTreeMap::new(),
            file: file.clone(),
            numerics,
        };
        let check_count = |what: &str, len: usize| -> Result<(), SchemaError> {
            if len != 1 && len != n {
                return schema(format!("{what}: expected 1 or {n} pieces, got {len}"));
            }
            Ok(())
        };

        for (name, p) in &file.fields {
            let what = format!("field `{name}`");
            let strings = p.strings();
            check_count(&what, strings.len())?;
            let pieces = strings.iter().map(|s| parse_expr(&what, s, only_x)).collect::<Result<Vec<_>, _>>()?;
            let value = breaks.clone().and_then(|b| BrokenField::new(b, pieces.clone()).map_err(|e| e.to_string()));
            model.fields.insert(name.clone(), Entry { kind: "field", description: describe_pieces(&pieces), value });
        }
        for (name, p) in &file.sections {
            let what = format!("section `{name}`");
            let strings = p.strings();
            check_count(&what, strings.len())?;
            let pieces = strings.iter().map(|s| parse_expr(&what, s, x_and_p)).collect::<Result<Vec<_>, _>>()?;
            let value = Section::new(n, pieces.clone(), Domain::All).map_err(|e| e.to_string());
            model.sections.insert(name.clone(), Entry { kind: "section", description: describe_pieces(&pieces), value });
        }

        let names: BTreeSet<&String> = file.diffeos.keys().collect();
        for (name, d) in &file.diffeos {
            validate_diffeo(name, d, n, &file.fields, &names)?;
        }
        let mut visiting = Vec::new();
        for name in file.diffeos.keys() {
            build_diffeo(&mut model, name, &mut visiting)?;
        }

        for (k, t) in file.triples.iter().enumerate() {
            for s in t {
                if !file.diffeos.contains_key(s) {
                    return schema(format!("triples[{k}]: unknown diffeo `{s}`"));
                }
            }
        }
        for (k, t) in file.pairs.iter().enumerate() {
            for s in t {
                if !file.diffeos.contains_key(s) {
                    return schema(format!("pairs[{k}]: unknown diffeo `{s}`"));
                }
            }
        }
        for (k, l) in file.linkage.iter().enumerate() {
            for s in [&l.u, &l.v] {
                if !file.fields.contains_key(s) {
                    return schema(format!("linkage[{k}]: unknown field `{s}`"));
                }
            }
            if l.arc == 0 || l.arc > n {
                return schema(format!("linkage[{k}]: arc must lie in 1..={n}, got {}", l.arc));
            }
            if let Some(h) = l.h {
                if !(h > 0.0) {
                    return schema(format!("linkage[{k}]: step must be positive"));
                }
            }
            if let Some(e) = &l.expected {
                e.value()?;
            }
        }
        if let Some(iv) = &file.interval {
            load_interval(&mut model, iv)?;
        }
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.break_angles.len()
    }

    pub fn field(&self, name: &str) -> Result<&BrokenField, String> {
        self.fields.get(name).ok_or_else(|| format!("unknown field `{name}`"))?.get(name)
    }

    pub fn diffeo(&self, name: &str) -> Result<&BrokenDiffeo, String> {
        self.diffeos.get(name).ok_or_else(|| format!("unknown diffeo `{name}`"))?.get(name)
    }

    pub fn interval_diffeo(&self, name: &str) -> Result<&IntervalDiffeo, String> {
        self.interval_diffeos.get(name).ok_or_else(|| format!("unknown interval diffeo `{name}`"))?.get(name)
    }

    pub fn interval_field(&self, name: &str) -> Result<&IntervalField, String> {
        self.interval_fields.get(name).ok_or_else(|| format!("unknown interval field `{name}`"))?.get(name)
    }

    /// Named sections, followed by the single-profile fields regarded as
    /// `p`-independent sections.
    pub fn section_like(&self) -> Vec<(String, String, Result<Section, String>)> {
        let mut out: Vec<_> = self
            .sections
            .iter()
            .map(|(k, e)| (k.clone(), e.description.clone(), e.get(k).cloned()))
            .collect();
        for (k, e) in &self.fields {
            if self.file.fields[k].strings().len() == 1 {
                let value = e.get(k).and_then(|f| Section::global(self.n(), f.pieces()[0].clone()).map_err(|e| e.to_string()));
                out.push((k.clone(), e.description.clone(), value));
            }
        }
        out
    }

    /// `(kind, name, description, error)` for every declared object.
    pub fn constructions(&self) -> Vec<(&'static str, String, String, Option<String>)> {
        let mut out = vec![(
            "breaks",
            "p".to_string(),
            format!("{:?}", self.break_angles),
            self.breaks.as_ref().err().cloned(),
        )];
        fn push<T>(out: &mut Vec<(&'static str, String, String, Option<String>)>, m: &BTreeMap<String, Entry<T>>) {
            for (k, e) in m {
                out.push((e.kind, k.clone(), e.description.clone(), e.value.as_ref().err().cloned()));
            }
        }
        push(&mut out, &self.fields);
        push(&mut out, &self.sections);
        push(&mut out, &self.diffeos);
        push(&mut out, &self.interval_fields);
        push(&mut out, &self.interval_diffeos);
        out
    }
}

fn numerics(s: &Settings) -> Result<Numerics, SchemaError> {
    let mut quad = QuadratureSpec::default();
    if let Some(t) = s.quadrature.abs_tol {
        quad.abs_tol = t;
    }
    if let Some(d) = s.quadrature.max_depth {
        quad.max_depth = d;
    }
    quad.validate().map_err(|e| SchemaError(format!("settings.quadrature: {e}")))?;
    let mut fd = FdSpec::default();
    if let Some(h) = s.fd_step {
        if !(h > 0.0) {
            return schema("settings.fd_step must be positive");
        }
        fd.h = h;
    }
    let flow = match s.flow_steps_per_unit {
        Some(k) => FlowSpec::new(k).map_err(|e| SchemaError(format!("settings.flow_steps_per_unit: {e}")))?,
        None => FlowSpec::default(),
    };
    if let Some(t) = s.tolerance {
        if !(t > 0.0) {
            return schema("settings.tolerance must be positive");
        }
    }
    if s.samples == Some(0) {
        return schema("settings.samples must be positive");
    }
    Ok(Numerics { quad, fd, flow, tolerance: s.tolerance, samples: s.samples })
}

fn validate_diffeo(
    name: &str,
    d: &DiffeoSpec,
    n: usize,
    fields: &BTreeMap<String, Pieces>,
    names: &BTreeSet<&String>,
) -> Result<(), SchemaError> {
    let what = format!("diffeo `{name}`");
    let kinds = [
        d.lift.is_some(),
        d.pieces.is_some(),
        d.rotation.is_some(),
        d.identity.is_some(),
        d.flow.is_some(),
        d.compose.is_some(),
        d.inverse.is_some(),
    ];
    if kinds.iter().filter(|k| **k).count() != 1 {
        return schema(format!("{what}: give exactly one of lift, pieces, rotation, identity, flow, compose, inverse"));
    }
    if d.flow.is_some() != d.time.is_some() {
        return schema(format!("{what}: `time` goes with `flow` and is required there"));
    }
    if d.source.is_some() && (d.flow.is_some() || d.compose.is_some() || d.inverse.is_some()) {
        return schema(format!("{what}: `source` is determined by the referenced objects"));
    }
    if let Some(src) = &d.source {
        if reals(&what, src)?.len() != n {
            return schema(format!("{what}: source must have {n} angles"));
        }
    }
    if let Some(p) = &d.pieces {
        if p.len() != 1 && p.len() != n {
            return schema(format!("{what}: expected 1 or {n} pieces, got {}", p.len()));
        }
    }
    if let Some(f) = &d.flow {
        if !fields.contains_key(f) {
            return schema(format!("{what}: unknown field `{f}`"));
        }
    }
    for r in d.compose.iter().flatten().chain(d.inverse.iter()) {
        if !names.contains(r) {
            return schema(format!("{what}: unknown diffeo `{r}`"));
        }
    }
    if matches!(&d.compose, Some(c) if c.is_empty()) {
        return schema(format!("{what}: compose needs at least one arrow"));
    }
    Ok(())
}

fn build_diffeo(model: &mut Model, name: &str, visiting: &mut Vec<String>) -> Result<(), SchemaError> {
    if model.diffeos.contains_key(name) {
        return Ok(());
    }
    if visiting.iter().any(|v| v == name) {
        return schema(format!("diffeo `{name}` refers to itself"));
    }
    visiting.push(name.to_string());
    let d = model.file.diffeos[name].clone();
    let what = format!("diffeo `{name}`");
    let src = match &d.source {
        Some(s) => config(&reals(&what, s)?),
        None => model.breaks.clone(),
    };
    let fail = |e: bvir_core::Error| e.to_string();
    let (description, value): (String, Result<BrokenDiffeo, String>) = if let Some(s) = &d.lift {
        let e = parse_expr(&what, s, |v| v == Var::X)?;
        (format!("lift {e} from {src:?}"), src.and_then(|p| BrokenDiffeo::from_lift(p, e).map_err(fail)))
    } else if let Some(ps) = &d.pieces {
        let pieces = ps.iter().map(|s| parse_expr(&what, s, |v| v == Var::X)).collect::<Result<Vec<_>, _>>()?;
        let desc = format!("pieces {} from {src:?}", describe_pieces(&pieces));
        (desc, src.and_then(|p| BrokenDiffeo::from_pieces(p, pieces).map_err(fail)))
    } else if let Some(a) = &d.rotation {
        let a = a.value()?;
        (format!("rotation {a:?} from {src:?}"), src.map(|p| BrokenDiffeo::rotation(&p, a)))
    } else if d.identity.is_some() {
        (format!("identity at {src:?}"), src.map(|p| BrokenDiffeo::identity(&p)))
    } else if let Some(f) = &d.flow {
        let t = d.time.as_ref().expect("validated").value()?;
        let field = model.fields[f].clone();
        let spec = model.numerics.flow;
        let value = field.get(f).and_then(|u| flow(u, t, &spec).map_err(fail));
        (format!("flow of {f} [{}] for {t:?}", field.description), value)
    } else if let Some(parts) = &d.compose {
        for p in parts {
            build_diffeo(model, p, visiting)?;
        }
        let mut acc: Result<BrokenDiffeo, String> = model.diffeo(parts.last().expect("validated")).cloned();
        for p in parts.iter().rev().skip(1) {
            acc = acc.and_then(|inner| model.diffeo(p).and_then(|outer| outer.compose(&inner).map_err(fail)));
        }
        let desc = parts.iter().map(|p| format!("({})", model.diffeos[p].description)).collect::<Vec<_>>().join(" o ");
        (desc, acc)
    } else {
        let of = d.inverse.as_ref().expect("validated");
        build_diffeo(model, of, visiting)?;
        let value = model.diffeo(of).and_then(|a| a.inverse().map_err(fail));
        (format!("inverse of ({})", model.diffeos[of].description), value)
    };
    visiting.pop();
    model.diffeos.insert(name.to_string(), Entry { kind: "diffeo", description, value });
    Ok(())
}

fn load_interval(model: &mut Model, iv: &IntervalSpec) -> Result<(), SchemaError> {
    let only_x = |v: Var| v == Var::X;
    for (name, f) in &iv.fields {
        let what = format!("interval field `{name}`");
        let (a, b) = (f.a.value()?, f.b.value()?);
        let e = parse_expr(&what, &f.profile, only_x)?;
        let value = IntervalField::new(a, b, e.clone(), f.vanishing).map_err(|e| e.to_string());
        let description = format!("{e} on [{a:?}, {b:?}] vanishing {}", f.vanishing);
        model.interval_fields.insert(name.clone(), Entry { kind: "interval field", description, value });
    }
    for (name, d) in &iv.diffeos {
        let what = format!("interval diffeo `{name}`");
        let (a, b) = (d.a.value()?, d.b.value()?);
        let e = parse_expr(&what, &d.map, only_x)?;
        let value = if d.fixed {
            IntervalDiffeo::fixed_endpoint(a, b, e.clone())
        } else {
            IntervalDiffeo::new(a, b, e.clone())
        }
        .map_err(|e| e.to_string());
        let description = format!("{e} on [{a:?}, {b:?}] fixed {}", d.fixed);
        model.interval_diffeos.insert(name.clone(), Entry { kind: "interval diffeo", description, value });
    }
    for (k, t) in iv.triples.iter().enumerate() {
        if let Some(s) = t.iter().find(|s| !iv.diffeos.contains_key(*s)) {
            return schema(format!("interval.triples[{k}]: unknown interval diffeo `{s}`"));
        }
    }
    for (k, t) in iv.field_triples.iter().enumerate() {
        if let Some(s) = t.iter().find(|s| !iv.fields.contains_key(*s)) {
            return schema(format!("interval.field_triples[{k}]: unknown interval field `{s}`"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<Model, SchemaError> {
        Model::from_json(s)
    }

    #[test]
    fn references_are_checked() {
        assert!(load(r#"{"breaks": [0], "diffeos": {"a": {"inverse": "b"}}}"#).is_err());
        assert!(load(r#"{"breaks": [0], "diffeos": {"a": {"inverse": "a"}}}"#).is_err());
        assert!(load(r#"{"breaks": [0], "fields": {"u": "sin(p1)"}}"#).is_err());
        assert!(load(r#"{"breaks": [0], "colour": 3}"#).is_err());
        assert!(load(r#"{"breaks": [0], "diffeos": {"a": {"lift": "x", "rotation": 1}}}"#).is_err());
    }

    #[test]
    fn construction_errors_are_kept() {
        let m = load(r#"{"breaks": [0, "pi"], "fields": {"k": ["sin(x)", "1 + sin(x)"]}}"#).unwrap();
        assert!(m.field("k").is_err());
        assert!(m.constructions().iter().any(|c| c.3.is_some()));
    }

    #[test]
    fn composites_and_inverses() {
        let m = load(
            r#"{"breaks": [0.5], "diffeos": {
                "a": {"lift": "x + 0.2*sin(x - 0.5)"}, "r": {"rotation": 0.3},
                "c": {"compose": ["r", "a"]}, "i": {"inverse": "c"}}}"#,
        )
        .unwrap();
        let c = m.diffeo("c").unwrap();
        let x: f64 = 1.0;
        assert!((c.value(x).unwrap() - (x + 0.2 * (x - 0.5).sin() + 0.3)).abs() < 1e-12);
        let i = m.diffeo("i").unwrap();
        assert!((i.value(c.value(x).unwrap()).unwrap() - x).abs() < 1e-10);
    }
}
