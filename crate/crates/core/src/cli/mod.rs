//! The `bdcat` command-line front end.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig, TransitionMethod};
use output::Format;

const CONFIG_HELP: &str = "\
Configuration is a JSON document read from --config or stdin:

  model     rates: {\"kind\": \"constant\", \"birth\", \"death\"}
                 | {\"kind\": \"affine\", \"birth_slope\", \"birth_offset\" (0), \"death_slope\", \"death_offset\" (0)}
                 | {\"kind\": \"table\", \"birth\": [...], \"death\": [...]}   (death[k] is the rate at level k+1)
            alpha, beta: catastrophe rates (>= 0)
  task      start (0), starts ([start]), times ([1.0]), levels (0..=10),
            frequency ({\"re\": 1, \"im\": 0}), replications (100000), seed (20240601),
            method (both), single_type (false)
  numerics  truncation {initial_level 64, max_level 1048576, rel_tol 1e-10, growth_factor 2}
            inversion {leading_terms 15, euler_terms 21, tol 1e-8, bound (gamma for densities), max_error 1e-6}
            quadrature {abs_tol 1e-8, order 16, max_panels 4096}
  output    format (csv; json for simulate, validate and crosscheck), path (stdout)

Unknown fields are rejected.

Exit codes: 0 ok, 1 malformed configuration, 2 constraint violation,
3 numerical failure, 4 cross-check failure.";

#[derive(Debug, Parser)]
#[command(name = "bdcat", version, about = "Birth-death processes with two-type catastrophes", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (stdin when absent).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for simulations.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long, global = true, value_name = "N")]
    reps: Option<usize>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Relative tolerance of the truncation refinement.
    #[arg(long, global = true, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Largest truncation level.
    #[arg(long = "max-level", global = true, value_name = "N")]
    max_level: Option<usize>,
    /// Transition method.
    #[arg(long, global = true, value_enum)]
    method: Option<TransitionMethod>,
    /// Use the single-type closed forms (needs alpha = 0 or beta = 0).
    #[arg(long = "single-type", global = true)]
    single_type: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model constraints.
    Validate,
    /// Transition probabilities p_{j,n}(t): columns t, n, p_formula, p_direct, abs_diff.
    Transition,
    /// Resolvent entries at one frequency: catastrophe-free, full and absorbed.
    Resolvent,
    /// Moments and type probabilities of the first effective catastrophe time.
    Catastrophe,
    /// Density and distribution function of the first effective catastrophe time.
    Density,
    /// Monte Carlo estimates with analytic values and z-scores.
    Simulate,
    /// Run every consistency check on the configured model.
    Crosscheck,
}

#[derive(Debug)]
pub(crate) enum Failure {
    Parse(String),
    Constraint(String),
    Numeric(String),
    Crosscheck(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Parse(_) => 1,
            Failure::Constraint(_) => 2,
            Failure::Numeric(_) | Failure::Io(_) => 3,
            Failure::Crosscheck(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Parse(m) => format!("configuration error: {m}"),
            Failure::Constraint(m) => format!("constraint violation: {m}"),
            Failure::Numeric(m) => format!("numerical failure: {m}"),
            Failure::Crosscheck(m) => format!("cross-check failed: {m}"),
            Failure::Io(m) => format!("i/o error: {m}"),
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?,
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::Parse(format!("stdin: {e}")))?;
            s
        }
    };
    let mut config = RunConfig::parse(&text).map_err(|e| Failure::Parse(e.to_string()))?;
    config.apply(&Overrides {
        seed: cli.seed,
        replications: cli.reps,
        format: cli.format,
        out: cli.out.clone(),
        tol: cli.tol,
        max_level: cli.max_level,
        method: cli.method,
        single_type: cli.single_type,
    });
    Ok(config)
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = load(&cli).and_then(|config| match cli.command {
        Command::Validate => commands::validate(&config),
        Command::Transition => commands::transition(&config),
        Command::Resolvent => commands::resolvent(&config),
        Command::Catastrophe => commands::catastrophe(&config),
        Command::Density => commands::density_cmd(&config),
        Command::Simulate => commands::simulate(&config),
        Command::Crosscheck => commands::crosscheck(&config),
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("bdcat: {}", f.message());
            f.code()
        }
    }
}
