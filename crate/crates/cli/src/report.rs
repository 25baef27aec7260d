//! Report documents. Reals are written with 17 significant digits, exact
//! rationals as `"num/den"` strings.

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Vector(Vec<f64>),
    Exact(String),
    Text(String),
    Int(i64),
    Bool(bool),
}

pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn real<S: Serializer>(x: f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return s.serialize_str(&fmt17(x));
    }
    RawValue::from_string(fmt17(x)).map_err(serde::ser::Error::custom)?.serialize(s)
}

struct R(f64);

impl Serialize for R {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        real(self.0, s)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Real(x) => real(*x, s),
            Value::Vector(v) => s.collect_seq(v.iter().map(|x| R(*x))),
            Value::Exact(t) | Value::Text(t) => s.serialize_str(t),
            Value::Int(k) => s.serialize_i64(*k),
            Value::Bool(b) => s.serialize_bool(*b),
        }
    }
}

impl Value {
    pub fn plain(&self) -> String {
        match self {
            Value::Real(x) => fmt17(*x),
            Value::Vector(v) => format!("[{}]", v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(", ")),
            Value::Exact(t) | Value::Text(t) => t.clone(),
            Value::Int(k) => k.to_string(),
            Value::Bool(b) => b.to_string(),
        }
    }

    /// Short form for terminal output.
    pub fn short(&self) -> String {
        match self {
            Value::Real(x) => format!("{x:.6e}"),
            Value::Vector(v) => format!("[{}]", v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(", ")),
            other => other.plain(),
        }
    }
}

/// Ordered name/value list written as a JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Values(pub Vec<(String, Value)>);

impl Serialize for Values {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: usize,
    pub name: String,
    pub inputs_digest: String,
    pub values: Values,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Value>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    /// `inputs` is a canonical description of everything the check reads.
    pub fn new(name: impl Into<String>, inputs: impl AsRef<str>) -> Check {
        Check {
            id: 0,
            name: name.into(),
            inputs_digest: hex::encode(Sha256::digest(inputs.as_ref().as_bytes())),
            values: Values::default(),
            residual: None,
            tolerance: None,
            pass: true,
            error: None,
        }
    }

    pub fn value(mut self, key: &str, v: Value) -> Check {
        self.values.0.push((key.to_string(), v));
        self
    }

    pub fn real(self, key: &str, x: f64) -> Check {
        self.value(key, Value::Real(x))
    }

    /// Passes iff `residual` is finite and at most `tol`.
    pub fn measure(mut self, residual: f64, tol: f64) -> Check {
        self.pass = residual.is_finite() && residual.abs() <= tol;
        self.residual = Some(Value::Real(residual));
        self.tolerance = Some(Value::Real(tol));
        self
    }

    pub fn fail(mut self, error: impl ToString) -> Check {
        self.pass = false;
        self.error = Some(error.to_string());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub suite: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_digest: Option<String>,
    pub environment: Values,
    pub checks: Vec<Check>,
    pub summary: Summary,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl Report {
    pub fn new(command: &str, suite: &str, scenario_text: Option<&str>, environment: Values, checks: Vec<Check>, wall: f64) -> Report {
        let checks: Vec<Check> = checks.into_iter().enumerate().map(|(i, c)| Check { id: i + 1, ..c }).collect();
        let passed = checks.iter().filter(|c| c.pass).count();
        Report {
            command: command.to_string(),
            suite: suite.to_string(),
            scenario_digest: scenario_text.map(|t| hex::encode(Sha256::digest(t.as_bytes()))),
            environment,
            summary: Summary { total: checks.len(), passed, failed: checks.len() - passed },
            pass: passed == checks.len(),
            checks,
            wall_time_s: wall,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,name,pass,residual,tolerance,inputs_digest,values,error\n");
        for c in &self.checks {
            let values = c.values.0.iter().map(|(k, v)| format!("{k}={}", v.plain())).collect::<Vec<_>>().join(";");
            let row = [
                c.id.to_string(),
                c.name.clone(),
                c.pass.to_string(),
                c.residual.as_ref().map(Value::plain).unwrap_or_default(),
                c.tolerance.as_ref().map(Value::plain).unwrap_or_default(),
                c.inputs_digest.clone(),
                values,
                c.error.clone().unwrap_or_default(),
            ];
            out.push_str(&row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("[{status}] {:>3} {}", c.id, c.name));
            let mut parts: Vec<String> = c.values.0.iter().map(|(k, v)| format!("{k} = {}", v.short())).collect();
            match (&c.residual, &c.tolerance) {
                (Some(r), Some(t)) => parts.push(format!("residual {} (tol {})", r.short(), t.short())),
                (Some(r), None) => parts.push(format!("residual = {}", r.short())),
                _ => {}
            }
            if !parts.is_empty() {
                out.push_str(&format!(": {}", parts.join(", ")));
            }
            if let Some(e) = &c.error {
                out.push_str(&format!("\n      error: {e}"));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "{} {}: {}/{} checks passed in {:.2} s\n",
            self.command, self.suite, self.summary.passed, self.summary.total, self.wall_time_s
        ));
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_keep_seventeen_digits() {
        let c = Check::new("c", "in").real("x", 0.1).measure(1.0 / 3.0, 1e-8);
        let r = Report::new("verify", "s", None, Values::default(), vec![c], 0.0);
        let json = r.to_json();
        assert!(json.contains("1.0000000000000001e-1"));
        assert!(!r.pass);
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["checks"][0]["values"]["x"].as_f64(), Some(0.1));
        assert_eq!(back["checks"][0]["id"], 1);
    }

    #[test]
    fn csv_quotes_fields() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
