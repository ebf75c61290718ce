use kcl_core::mc::McEstimate;
use kcl_core::rational::{to_pq, Rational};
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// One CSV line.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub check: String,
    pub params: String,
    pub values: String,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub target: String,
    pub verdict: Verdict,
}

impl Row {
    pub fn exact(check: impl Into<String>, params: impl Into<String>, values: impl Into<String>, target: impl Into<String>, ok: bool) -> Self {
        Row {
            check: check.into(),
            params: params.into(),
            values: values.into(),
            estimate: None,
            stderr: None,
            target: target.into(),
            verdict: Verdict::from_bool(ok),
        }
    }

    pub fn info(check: impl Into<String>, params: impl Into<String>, values: impl Into<String>) -> Self {
        Row {
            verdict: Verdict::Info,
            ..Row::exact(check, params, values, "", true)
        }
    }

    /// Monte-Carlo row judged at `k` standard errors.
    pub fn mc(check: impl Into<String>, params: impl Into<String>, est: &McEstimate, target: f64, k: f64) -> Self {
        Row {
            check: check.into(),
            params: params.into(),
            values: format!("samples={}", est.samples),
            estimate: Some(est.mean),
            stderr: Some(est.stderr),
            target: target.to_string(),
            verdict: Verdict::from_bool(est.within(target, k)),
        }
    }

    /// Float value against a target with an absolute tolerance.
    pub fn close(check: impl Into<String>, params: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Row {
            check: check.into(),
            params: params.into(),
            values: format!("tol={tol}"),
            estimate: Some(value),
            stderr: None,
            target: target.to_string(),
            verdict: Verdict::from_bool((value - target).abs() <= tol),
        }
    }
}

/// `a=p/q;b=p/q`.
pub fn pq_list<'a>(items: impl IntoIterator<Item = (&'a str, &'a Rational)>) -> String {
    items
        .into_iter()
        .map(|(k, v)| format!("{k}={}", to_pq(v)))
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub rows: Vec<Row>,
    pub artifacts: Vec<serde_json::Value>,
}

impl RunReport {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        RunReport {
            tool: "kcl",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            rows: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail).count()
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, String> {
        match format {
            Format::Json => {
                let mut v = serde_json::to_vec_pretty(self).map_err(|e| e.to_string())?;
                v.push(b'\n');
                Ok(v)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in &self.rows {
                    w.serialize(r).map_err(|e| e.to_string())?;
                }
                if self.rows.is_empty() {
                    w.write_record(["check", "params", "values", "estimate", "stderr", "target", "verdict"])
                        .map_err(|e| e.to_string())?;
                }
                w.into_inner().map_err(|e| e.to_string())
            }
        }
    }

    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<(), String> {
        let bytes = self.render(format)?;
        match out {
            Some(p) => std::fs::write(p, bytes).map_err(|e| format!("{}: {e}", p.display())),
            None => std::io::stdout().write_all(&bytes).map_err(|e| e.to_string()),
        }
    }
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input schema: exit 2.
    Usage(String),
    /// An error raised by a library module: exit 3.
    Module { module: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Module { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Module { module, message } => write!(f, "{module}: {message}"),
        }
    }
}

pub fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

/// Wraps a module error with its module name.
pub fn module<E: fmt::Display>(module: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Module {
        module,
        message: e.to_string(),
    }
}
