//! `szz`: mine `Fixes:` ground truth from a git history, run SZZ variants
//! over it, classify the outcomes and report metrics.
//!
//! Exit codes: 0 success, 2 repository error, 3 write error, 4 missing
//! dataset, 5 missing B-SZZ predictions, 6 missing report inputs, 64 usage.

mod config;
mod stages;
mod stamp;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load_config, Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Repo(String),
    Write(String),
    MissingDataset(String),
    MissingBaseline(String),
    MissingInputs(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Repo(_) => 2,
            CliError::Write(_) => 3,
            CliError::MissingDataset(_) => 4,
            CliError::MissingBaseline(_) => 5,
            CliError::MissingInputs(_) => 6,
            CliError::Usage(_) => 64,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Repo(m)
            | CliError::Write(m)
            | CliError::MissingDataset(m)
            | CliError::MissingBaseline(m)
            | CliError::MissingInputs(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "szz", version, about = "Locate bug-inducing commits with SZZ variants and evaluate them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// Flat key = value file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    repo: Option<PathBuf>,
    /// Revision the history is pinned to.
    #[arg(long, global = true)]
    until: Option<String>,
    /// Comma-separated subset of B,AG,L,R,MA,PYD,TC, or `all`.
    #[arg(long, global = true)]
    algos: Option<String>,
    /// TC-SZZ chain depth; -1 traces every line to its initial commit.
    #[arg(long, global = true, allow_negative_numbers = true)]
    blame_count: Option<i32>,
    #[arg(long, global = true)]
    similarity_threshold: Option<f64>,
    /// Write one prompt file per classified failure.
    #[arg(long, global = true)]
    emit_prompts: bool,
    /// Also write per-line attribution (and TC chains) as JSON.
    #[arg(long, global = true)]
    attribution: bool,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (for `fixture build`, the repository to create).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract fix/inducer links from Fixes: trailers.
    Mine,
    /// Run the selected algorithms over the mined dataset.
    Run,
    /// Categorize outcomes, label failure modes and ghosts.
    Classify,
    /// Aggregate metrics into report.json and table.csv.
    Report,
    /// Scripted fixture repositories.
    Fixture {
        #[command(subcommand)]
        command: FixtureCommand,
    },
}

#[derive(Subcommand, Debug)]
enum FixtureCommand {
    /// Build a repository from a script and print `label sha` lines.
    Build { script: PathBuf },
}

fn overrides(o: &Opts) -> Result<Overrides, CliError> {
    let flags = Overrides {
        repo: o.repo.clone(),
        until: o.until.clone(),
        algorithms: o.algos.clone(),
        tc_mode: None,
        blame_count: o.blame_count,
        similarity_threshold: o.similarity_threshold,
        emit_prompts: o.emit_prompts.then_some(true),
        attribution: o.attribution.then_some(true),
        workers: o.workers,
        out: o.out.clone(),
    };
    let file = match &o.config {
        Some(p) => load_config(p)?,
        None => Overrides::default(),
    };
    Ok(file.merge(flags))
}

fn build_fixture(script: &PathBuf, o: &Opts) -> Result<String, CliError> {
    use szz_core::fixture::{build_fixture, FixtureError, FixtureScript};
    let text = std::fs::read_to_string(script).map_err(|e| CliError::Usage(format!("{}: {e}", script.display())))?;
    let parsed = FixtureScript::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", script.display())))?;
    let dest = o
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("fixture build needs --out".into()))?;
    let map = build_fixture(&parsed, &dest).map_err(|e| match e {
        FixtureError::IoFailure(e) => CliError::Write(e),
        other => CliError::Repo(other.to_string()),
    })?;
    let mut lines = Vec::new();
    for step in &parsed.steps {
        lines.push(format!("{} {}", step.label, map.id(&step.label)));
    }
    Ok(lines.join("\n"))
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    if let Command::Fixture {
        command: FixtureCommand::Build { script },
    } = &cli.command
    {
        return build_fixture(script, &cli.opts);
    }
    let cfg = RunConfig::resolve(overrides(&cli.opts)?)?;
    log::info!("{cfg:?}");
    match cli.command {
        Command::Mine => stages::mine(&cfg),
        Command::Run => stages::run(&cfg),
        Command::Classify => stages::classify(&cfg),
        Command::Report => stages::report(&cfg),
        Command::Fixture { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("szz: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
