//! `bvir`: verification suites, cocycle evaluations and exact tables for
//! broken circle diffeomorphisms.

mod compute;
mod report;
mod scenario;
mod suites;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use compute::{Args, TableKind, What};
use report::{Report, Value, Values};
use scenario::Model;
use suites::{Ctx, Suite};

/// Bad arguments or a bad scenario document (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<scenario::SchemaError> for UsageError {
    fn from(e: scenario::SchemaError) -> Self {
        UsageError(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Parser)]
#[command(name = "bvir", version, about = "Cocycle checks for broken circle diffeomorphisms and their algebroid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Format of the report printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run a property suite on seeded random inputs and the scenario's pinned inputs.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace every default tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Evaluate one operation on named scenario objects, e.g. `compute omega u=e1 v=e2 arc=1`.
    Compute {
        #[arg(value_enum)]
        what: What,
        #[arg(long)]
        scenario: PathBuf,
        /// 1-based arc; all arcs when omitted.
        #[arg(long)]
        arc: Option<usize>,
        /// `key=value` arguments: u, v, phi, psi, field, t, points, arc.
        args: Vec<String>,
    },
    /// Exact sin-basis values or the non-triviality certificate.
    Table {
        #[arg(value_enum)]
        what: TableKind,
        #[arg(long)]
        bound: u32,
    },
}

fn run(cli: &Cli) -> Result<Report, UsageError> {
    let start = Instant::now();
    match &cli.command {
        Command::Verify { suite, scenario, seed, tol } => {
            if let Some(t) = tol {
                if !(*t > 0.0) {
                    return Err(UsageError(format!("--tol must be positive, got {t}")));
                }
            }
            let model = Model::load(scenario)?;
            let ctx = Ctx { model: &model, suite: *suite, seed: *seed, tol: *tol };
            let checks = suites::run(&ctx);
            let mut env = ctx.environment();
            if let Some(t) = tol.or(model.numerics.tolerance) {
                env.0.push(("tolerance_override".into(), Value::Real(t)));
            }
            Ok(Report::new("verify", suite.name(), Some(&scenario_text(&model)), env, checks, start.elapsed().as_secs_f64()))
        }
        Command::Compute { what, scenario, arc, args } => {
            let model = Model::load(scenario)?;
            let args = Args::parse(*what, args, *arc)?;
            let checks = compute::run(&model, *what, &args)?;
            let env = Values(vec![
                ("quadrature_abs_tol".into(), Value::Real(model.numerics.quad.abs_tol)),
                ("flow_steps_per_unit".into(), Value::Int(model.numerics.flow.steps_per_unit as i64)),
                ("version".into(), Value::Text(env!("CARGO_PKG_VERSION").into())),
            ]);
            Ok(Report::new("compute", what.name(), Some(&scenario_text(&model)), env, checks, start.elapsed().as_secs_f64()))
        }
        Command::Table { what, bound } => {
            let checks = compute::table(*what, *bound)?;
            let env = Values(vec![
                ("bound".into(), Value::Int(*bound as i64)),
                ("version".into(), Value::Text(env!("CARGO_PKG_VERSION").into())),
            ]);
            Ok(Report::new("table", what.name(), None, env, checks, start.elapsed().as_secs_f64()))
        }
    }
}

/// Scenario content for the report digest. Paths are left out so that copies
/// of a scenario give identical reports.
fn scenario_text(model: &Model) -> String {
    model.text.clone()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(path) = &cli.report {
        if let Err(e) = std::fs::write(path, report.to_json() + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    match cli.format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => println!("{}", report.to_json()),
        Format::Csv => print!("{}", report.to_csv()),
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
