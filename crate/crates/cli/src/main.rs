mod commands;
mod inputs;
mod report;

use clap::{Args, Parser, Subcommand};
use report::{usage, CliError, Format, RunReport};
use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "kcl", version, about = "Exact and Monte-Carlo checks of Kac-type identities")]
#[command(args_override_self = true)]
struct Cli {
    /// JSON file whose `command` key names the subcommand and whose other
    /// keys are its flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; required by every Monte-Carlo operation and random sweep.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads.
    #[arg(long, global = true, env = "KCL_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Vertex-expectation equality for every kernel family.
    VeCheck(commands::VeCheckArgs),
    /// Catalog identities, direct sums against chain expectations.
    Identities(commands::IdentitiesArgs),
    /// Epoch/duration pair equalities on a poset-time system.
    Epodur(commands::EpodurArgs),
    /// Cardinality averages for the triangle on `(Z/n)^2`.
    TorusDemo(commands::TorusDemoArgs),
    /// Kac-function conditions for the finite-depth dyadic odometer.
    Odometer(commands::OdometerArgs),
    /// Circle rotations, Helmberg functionals and torus-flow crossings.
    Flows(commands::FlowsArgs),
    /// Renewal-process checks.
    Renewal(commands::RenewalArgs),
    /// Equidecomposition LP, least max and average norm.
    Equidecomp(commands::EquidecompArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VeCheck(_) => "ve-check",
            Command::Identities(_) => "identities",
            Command::Epodur(_) => "epodur",
            Command::TorusDemo(_) => "torus-demo",
            Command::Odometer(_) => "odometer",
            Command::Flows(_) => "flows",
            Command::Renewal(_) => "renewal",
            Command::Equidecomp(_) => "equidecomp",
        }
    }
}

/// Finds `--config <path>` / `--config=<path>` and removes it from `args`.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<PathBuf>, CliError> {
    for i in 1..args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            let p = args.get(i + 1).cloned().ok_or_else(|| usage("--config needs a path"))?;
            args.drain(i..=i + 1);
            return Ok(Some(PathBuf::from(p)));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            let p = PathBuf::from(p);
            args.remove(i);
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Turns a config object into `[command, --key, value, ...]`.
fn config_argv(path: &PathBuf) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| usage(format!("config: {e}")))?;
    let serde_json::Value::Object(map) = value else {
        return Err(usage("config must be a JSON object"));
    };
    let command = map
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or_else(|| usage("config needs a string `command`"))?;
    let mut argv = vec![OsString::from(command)];
    for (key, v) in &map {
        if key == "command" {
            continue;
        }
        if key == "config" {
            return Err(usage("config files cannot nest"));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &serde_json::Value| -> Result<String, CliError> {
            match v {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                serde_json::Value::Object(_) => Ok(v.to_string()),
                _ => Err(usage(format!("config key `{key}` has an unsupported value"))),
            }
        };
        match v {
            serde_json::Value::Bool(true) => argv.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                argv.push(flag.into());
                argv.push(parts.join(",").into());
            }
            other => {
                argv.push(flag.into());
                argv.push(scalar(other)?.into());
            }
        }
    }
    Ok(argv)
}

/// Command-line arguments with a config file spliced in ahead of the
/// remaining flags, so flags given directly take precedence.
fn effective_args() -> Result<Vec<OsString>, CliError> {
    let mut args: Vec<OsString> = std::env::args_os().collect();
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let mut out = vec![args[0].clone()];
    out.extend(config_argv(&path)?);
    out.extend(args.into_iter().skip(1));
    Ok(out)
}

fn run() -> Result<RunReport, CliError> {
    let args = effective_args()?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.to_string();
            return Err(usage(msg.trim_start_matches("error: ").trim_end()));
        }
    };
    debug_assert!(cli.config.is_none());
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let mut report = RunReport::new(cli.command.name(), cli.seed);
    let seed = cli.seed;
    let res = match &cli.command {
        Command::VeCheck(a) => commands::ve_check(a, seed, &mut report),
        Command::Identities(a) => commands::identities(a, seed, &mut report),
        Command::Epodur(a) => commands::epodur(a, seed, &mut report),
        Command::TorusDemo(a) => commands::torus_demo(a, &mut report),
        Command::Odometer(a) => commands::odometer(a, seed, &mut report),
        Command::Flows(a) => commands::flows(a, seed, &mut report),
        Command::Renewal(a) => commands::renewal(a, seed, &mut report),
        Command::Equidecomp(a) => commands::equidecomp(a, &mut report),
    };
    res?;
    report
        .emit(cli.format, cli.out.as_deref())
        .map_err(|m| CliError::Module { module: "io", message: m })?;
    Ok(report)
}

fn main() -> ExitCode {
    match run() {
        Ok(report) => {
            let fails = report.failures();
            if fails > 0 {
                eprintln!("{fails} check(s) failed");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Flags shared by commands that take an explicit system and set.
#[derive(Args, Debug, Clone)]
pub struct SystemArgs {
    /// System descriptor: a JSON file or an inline JSON object.
    #[arg(long, conflicts_with = "sizes")]
    pub system: Option<String>,
    /// Torus `Z/a x Z/b x ...` given as `a,b,...`.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Point indices of `E`, comma separated.
    #[arg(long)]
    pub e: Option<String>,
}

impl SystemArgs {
    pub fn given(&self) -> bool {
        self.system.is_some() || self.sizes.is_some()
    }

    pub fn system(&self) -> Result<kcl_core::FiniteSystem, CliError> {
        match (&self.system, &self.sizes) {
            (Some(s), _) => inputs::load_system(s),
            (None, Some(s)) => inputs::torus_system(s),
            (None, None) => Err(usage("one of --system and --sizes is required")),
        }
    }

    pub fn set(&self, n: usize) -> Result<kcl_core::PointSet, CliError> {
        let e = self.e.as_deref().ok_or_else(|| usage("--e is required"))?;
        inputs::parse_set(e, n, "--e")
    }
}
