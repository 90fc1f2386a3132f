//! The `kuifje` command line: argument definitions, input loading and
//! report rendering. `execute` runs a parsed command line and returns what
//! the binary prints, so tests can drive it without spawning processes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

mod commands;
pub mod literal;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "kuifje", version, about = "Loss-transformer analysis of probabilistic programs with leaks and demonic choice")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print a JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Add wall-clock timings to JSON reports (which are then no longer reproducible byte for byte).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and typecheck a program, datatype, context or loss file.
    Check { file: PathBuf },
    /// Weakest pre-loss of a program for a post-loss.
    Wpl {
        file: PathBuf,
        #[arg(long)]
        post: PathBuf,
        /// Extra variables carried along unchanged, e.g. `z:{0,1}`.
        #[arg(long)]
        ext: Option<String>,
        #[arg(long)]
        loop_budget: Option<usize>,
        /// Also evaluate the pre-loss at this prior (a file, `uniform`, or `state=weight` pairs).
        #[arg(long)]
        prior: Option<String>,
    },
    /// Check that the first program is refined by the second.
    Refine {
        p: PathBuf,
        q: PathBuf,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        ext: Option<String>,
        #[arg(long)]
        loop_budget: Option<usize>,
    },
    /// Check data refinement of two datatypes in the given program contexts.
    Datatype {
        #[arg(value_name = "ABSTRACT")]
        abs: PathBuf,
        #[arg(value_name = "CONCRETE")]
        conc: PathBuf,
        #[arg(long = "context", required = true)]
        contexts: Vec<PathBuf>,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        loop_budget: Option<usize>,
        /// Evaluate both composites at this prior for every witness loss.
        #[arg(long)]
        prior: Option<String>,
    },
    /// Check a forward or backward simulation between two datatypes.
    Simulate {
        #[command(flatten)]
        direction: DirectionArgs,
        #[arg(value_name = "ABSTRACT")]
        abs: PathBuf,
        #[arg(value_name = "CONCRETE")]
        conc: PathBuf,
        #[arg(long)]
        rep: PathBuf,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        ext: Option<String>,
        #[arg(long)]
        loop_budget: Option<usize>,
    },
    /// Least achievable expected loss of a loop-free program, by forward execution.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        prior: String,
        #[arg(long)]
        post: PathBuf,
        /// Enumerate whole strategies instead of choosing per history.
        #[arg(long)]
        exhaustive: bool,
        /// Give up after this many strategies in exhaustive mode.
        #[arg(long, default_value_t = 4096)]
        cap: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct FamilyArgs {
    /// Test family options, e.g. `k=2,random=50,seed=0,cap=20000`.
    #[arg(long, default_value = "default")]
    pub family: String,
    /// Extra loss files to test with, wherever their variables fit.
    #[arg(long = "witness")]
    pub witnesses: Vec<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
#[group(required = true, multiple = false)]
pub struct DirectionArgs {
    #[arg(long)]
    pub forward: bool,
    #[arg(long)]
    pub backward: bool,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CliError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax(_) | CliError::Io(_) => 1,
            CliError::Type(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Syntax(_) => "syntax",
            CliError::Type(_) => "type",
            CliError::Io(_) => "io",
        }
    }
}

impl From<kuifje::lang::ParseError> for CliError {
    fn from(e: kuifje::lang::ParseError) -> Self {
        CliError::Syntax(e.to_string())
    }
}

impl From<kuifje::lang::TypeError> for CliError {
    fn from(e: kuifje::lang::TypeError) -> Self {
        CliError::Type(e.to_string())
    }
}

macro_rules! as_type_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Type(e.to_string())
            }
        }
    )*};
}

as_type_error!(
    kuifje::algebra::AlgebraError,
    kuifje::wpl::WplError,
    kuifje::oracle::OracleError,
    kuifje::refine::RefineError
);

/// What the binary prints and the exit code it returns.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    /// The JSON report, present whether or not `--json` was asked for.
    pub report: serde_json::Value,
}

#[derive(Serialize)]
struct Input {
    role: String,
    path: String,
    sha256: String,
}

/// Reads input files, remembering their digests for the report.
#[derive(Default)]
pub(crate) struct Inputs {
    seen: Vec<Input>,
}

impl Inputs {
    pub(crate) fn read(&mut self, role: &str, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))?;
        let digest = Sha256::digest(&bytes);
        self.seen.push(Input {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{:02x}", b)).collect(),
        });
        String::from_utf8(bytes).map_err(|_| CliError::Io(format!("{}: not UTF-8", path.display())))
    }

    /// A prior given inline or as a path to a file.
    pub(crate) fn read_spec(&mut self, role: &str, spec: &str) -> Result<String, CliError> {
        let p = Path::new(spec);
        if p.is_file() {
            self.read(role, p)
        } else {
            Ok(spec.to_string())
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    command: &'a str,
    inputs: &'a [Input],
    exit_code: i32,
    result: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings_ms: Option<f64>,
}

/// Human-readable text and the structured result of a command.
pub(crate) struct Done {
    pub code: i32,
    pub text: String,
    pub result: serde_json::Value,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Check { .. } => "check",
        Command::Wpl { .. } => "wpl",
        Command::Refine { .. } => "refine",
        Command::Datatype { .. } => "datatype",
        Command::Simulate { .. } => "simulate",
        Command::Oracle { .. } => "oracle",
    }
}

pub fn execute(cli: &Cli) -> Outcome {
    let start = Instant::now();
    let mut inputs = Inputs::default();
    let done = commands::run(&cli.command, &mut inputs);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let (code, text, result, err) = match done {
        Ok(d) => (d.code, d.text, d.result, None),
        Err(e) => {
            let result = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            (e.exit_code(), String::new(), result, Some(e.to_string()))
        }
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: command_name(&cli.command),
        inputs: &inputs.seen,
        exit_code: code,
        result,
        timings_ms: cli.timings.then_some(elapsed),
    };
    let report = serde_json::to_value(&report).expect("serializable");
    let stdout = if cli.json {
        serde_json::to_string_pretty(&report).expect("serializable") + "\n"
    } else {
        text
    };
    let stderr = err.map(|e| format!("error: {}\n", e)).unwrap_or_default();
    Outcome { code, stdout, stderr, report }
}

/// Parses `args` (including the program name) and runs them.
pub fn execute_args<I, T>(args: I) -> Result<Outcome, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Ok(execute(&Cli::try_parse_from(args)?))
}
