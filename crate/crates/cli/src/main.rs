//! `zlab`: command-line front end of the laboratory.

mod commands;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use params::*;

#[derive(Parser, Debug)]
#[command(name = "zlab", version, about = "Spectral laboratory for the Zakharov system on anisotropic tori")]
struct Cli {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of the single random generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the system and emit diagnostics as JSON lines.
    Solve(WithTorus<SolveParams>),
    /// Classify a regularity pair `(s, l)`.
    Classify(ClassifyParams),
    /// Enumerate near-resonant pairs as CSV.
    Resonances(WithTorus<ResonanceParams>),
    /// Count lattice points in an annulus-slab domain.
    Count(WithTorus<CountParams>),
    /// Sharp trilinear constants for dyadic blocks.
    Estimate(WithTorus<EstimateParams>),
    /// Norm-inflation and counterexample experiments.
    Inflate(WithTorus<InflateParams>),
    /// Sobolev and Bourgain norms of free evolutions.
    Norms(WithTorus<NormsParams>),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Classify(_) => "classify",
            Command::Resonances(_) => "resonances",
            Command::Count(_) => "count",
            Command::Estimate(_) => "estimate",
            Command::Inflate(_) => "inflate",
            Command::Norms(_) => "norms",
        }
    }
}

/// On-disk experiment config.
#[derive(Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<String>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    torus: Option<Map<String, Value>>,
    #[serde(default)]
    params: Map<String, Value>,
}

/// Resolved settings shared by every command.
pub struct RunContext {
    pub command: &'static str,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

/// Marks an error as a validation failure of the inputs.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Invalid(msg.into()))
}

/// Flag values overlaid on the file's `section`, then decoded into `T`.
fn merge<T: Serialize + DeserializeOwned>(section: &str, file: Map<String, Value>, flags: &T) -> Result<T> {
    let mut merged = file;
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| invalid(format!("config key in `{section}`: {e}")))
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
}

fn resolve<P: clap::Args + Serialize + DeserializeOwned>(file: &mut ConfigFile, args: &WithTorus<P>) -> Result<(P, TorusArgs)> {
    let params = merge("params", std::mem::take(&mut file.params), &args.params)?;
    let torus = merge("torus", file.torus.take().unwrap_or_default(), &args.torus)?;
    Ok((params, torus))
}

fn run(cli: Cli) -> Result<()> {
    let mut file = load_config(&cli.config)?;
    let name = cli.command.name();
    if let Some(c) = &file.command {
        if c != name {
            return Err(invalid(format!("config key `command` is {c:?} but the subcommand is {name:?}")));
        }
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(invalid("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("thread pool")?;
    }
    let ctx = RunContext { command: name, seed: cli.seed.or(file.seed).unwrap_or(0), output: cli.output.clone().or(file.output.take()) };
    match &cli.command {
        Command::Classify(p) => {
            let params = merge("params", std::mem::take(&mut file.params), p)?;
            if file.torus.is_some() {
                return Err(invalid("config key `torus` is not used by classify"));
            }
            commands::classify(&ctx, params)
        }
        Command::Solve(a) => {
            let (p, t) = resolve(&mut file, a)?;
            commands::solve(&ctx, p, t)
        }
        Command::Resonances(a) => {
            let (p, t) = resolve(&mut file, a)?;
            commands::resonances(&ctx, p, t)
        }
        Command::Count(a) => {
            let (p, t) = resolve(&mut file, a)?;
            commands::count(&ctx, p, t)
        }
        Command::Estimate(a) => {
            let (p, t) = resolve(&mut file, a)?;
            commands::estimate(&ctx, p, t)
        }
        Command::Inflate(a) => {
            let (p, t) = resolve(&mut file, a)?;
            commands::inflate(&ctx, p, t)
        }
        Command::Norms(a) => {
            let (p, t) = resolve(&mut file, a)?;
            commands::norms(&ctx, p, t)
        }
    }
}

/// 2 for numerical aborts, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .any(|e| e.downcast_ref::<zlab_core::Error>().is_some_and(zlab_core::Error::is_numerical));
    if numerical {
        2
    } else {
        1
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .any(|e| e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
