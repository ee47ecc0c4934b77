mod clean;
mod eval;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dcflow::benchmark::{inject_errors, validate_case, ErrorProfile, Suite};
use dcflow::query::execute_purpose;
use dcflow::workflow::Workflow;
use tracing_subscriber::EnvFilter;

use crate::io::{read_table, write_atomic, write_json};

#[derive(Parser)]
#[command(name = "dcflow", version, about = "Purpose-driven data cleaning workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Http,
    Scripted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Iterative,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Granularity {
    ColumnAndOp,
    OpOnly,
}

#[derive(clap::Args, Debug)]
pub struct CleanArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// Case ids to clean; all cases when omitted.
    #[arg(long = "case")]
    pub cases: Vec<String>,
    /// Use this table instead of the case's raw table (single case only).
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "http")]
    pub backend: BackendKind,
    /// Script file, or a directory holding `<case-id>.json` scripts.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "iterative")]
    pub mode: Mode,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Recorded in run.json.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write every intermediate table.
    #[arg(long)]
    pub history: bool,
}

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// Directory with `<case-id>/cleaned.csv` and `<case-id>/workflow.json`.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Row label for the system under test.
    #[arg(long, default_value = "dcflow")]
    pub label: String,
    #[arg(long, value_enum, default_value = "column-and-op")]
    pub granularity: Granularity,
    #[arg(long)]
    pub no_baseline: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate cleaning workflows with the agent.
    Clean(CleanArgs),
    /// Apply a saved workflow to a table.
    Replay {
        #[arg(long)]
        workflow: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for step_000.csv (input) through step_NNN.csv.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Corrupt a clean table according to an error profile.
    Inject {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Overrides the profile seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score cleaning results against a suite.
    Eval(EvalArgs),
    /// Run the self-checks on every case of a suite.
    Validate {
        #[arg(long)]
        suite: PathBuf,
    },
    /// Print a case's purpose answer computed on a table.
    Answer {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long = "case")]
        case: String,
        /// Defaults to the case's gold table.
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

/// Outcome severities, mapped to exit codes 0, 2 and 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Ok,
    Degraded,
    Failed,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::Degraded => 2,
            Outcome::Failed => 1,
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Clean(args) => clean::run(&args),
        Command::Replay {
            workflow,
            table,
            out,
            history,
        } => replay(&workflow, &table, &out, history.as_deref()),
        Command::Inject {
            table,
            profile,
            out,
            log,
            seed,
        } => inject(&table, &profile, &out, &log, seed),
        Command::Eval(args) => eval::run(&args),
        Command::Validate { suite } => validate(&suite),
        Command::Answer { suite, case, table } => answer(&suite, &case, table.as_deref()),
    }
}

fn replay(workflow: &Path, table: &Path, out: &Path, history: Option<&Path>) -> Result<Outcome> {
    let bytes = std::fs::read(workflow).with_context(|| format!("reading {}", workflow.display()))?;
    let wf = Workflow::deserialize(&bytes).with_context(|| format!("loading {}", workflow.display()))?;
    let input = read_table(table)?;
    let hist = wf.replay(&input).context("replay failed")?;
    if let Some(dir) = history {
        for (i, t) in hist.tables.iter().enumerate() {
            write_atomic(&dir.join(format!("step_{i:03}.csv")), t.to_csv().as_bytes())?;
        }
    }
    write_atomic(out, hist.final_table().to_csv().as_bytes())?;
    Ok(Outcome::Ok)
}

fn inject(table: &Path, profile: &Path, out: &Path, log: &Path, seed: Option<u64>) -> Result<Outcome> {
    let bytes = std::fs::read(profile).with_context(|| format!("reading {}", profile.display()))?;
    let mut p: ErrorProfile =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", profile.display()))?;
    if let Some(s) = seed {
        p.seed = s;
    }
    let input = read_table(table)?;
    let (dirty, errors) = inject_errors(&input, &p)?;
    write_atomic(out, dirty.to_csv().as_bytes())?;
    write_json(log, &errors)?;
    eprintln!(
        "injected {} errors (rate {:.4})",
        errors.entries.len(),
        errors.realized_rate(input.row_count(), p.columns.len())
    );
    Ok(Outcome::Ok)
}

fn validate(suite_path: &Path) -> Result<Outcome> {
    let suite = Suite::load(suite_path)?;
    let mut bad = 0;
    for entry in &suite.cases {
        match suite.load_case(entry) {
            Ok(case) => {
                let findings = validate_case(&case);
                if findings.is_empty() {
                    println!("ok    {}", entry.id);
                } else {
                    bad += 1;
                    for f in findings {
                        println!("FAIL  {}: {f}", entry.id);
                    }
                }
            }
            Err(e) => {
                bad += 1;
                println!("FAIL  {}: {e}", entry.id);
            }
        }
    }
    if bad > 0 {
        bail!("{bad} of {} cases failed validation", suite.cases.len());
    }
    Ok(Outcome::Ok)
}

fn answer(suite_path: &Path, id: &str, table: Option<&Path>) -> Result<Outcome> {
    let suite = Suite::load(suite_path)?;
    let entry = suite
        .find(id)
        .with_context(|| format!("no case {id:?} in {}", suite_path.display()))?;
    let case = suite.load_case(entry)?;
    let t = match table {
        Some(p) => read_table(p)?,
        None => case.gold.clone(),
    };
    let a = execute_purpose(&case.purpose().query, &t)?;
    println!("{}", serde_json::to_string(&a)?);
    Ok(Outcome::Ok)
}
