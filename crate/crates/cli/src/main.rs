use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qbayes_core::io;
use qbayes_core::problem::{self, check_candidate, parse_analyses, Analysis, Problem, RandomKind, ToleranceOverrides};
use qbayes_core::{Error, Result, Tolerances};
use serde_json::json;

/// Bayesian inverses, disintegrations and conditional expectations of quantum channels.
#[derive(Parser)]
#[command(name = "qbayes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run analyses on a problem file and print the report.
    Check {
        file: PathBuf,
        /// Comma-separated subset of bayes-battery, bayes-existence, disintegrate, condexp, ac,
        /// takesaki, bridge. Defaults to the file's list, else every applicable analysis.
        #[arg(long)]
        analyses: Option<String>,
        /// Also verify this channel as a Bayesian inverse and as a disintegration.
        #[arg(long)]
        candidate: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Construct a Bayesian inverse or a disintegration and write it as a channel file.
    Invert {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Print a seeded random problem.
    Random {
        /// Block sizes as "source->target", e.g. "2->4" or "2,1->3,4".
        #[arg(long)]
        dims: String,
        /// product, nonproduct, rankdef, kraus or vector-state.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bayes,
    Disint,
}

#[derive(Args)]
struct TolArgs {
    #[arg(long)]
    eps_eq: Option<f64>,
    #[arg(long)]
    eps_rank: Option<f64>,
}

#[derive(Args)]
#[group(multiple = false)]
struct FormatArgs {
    /// Single-line JSON (the default).
    #[arg(long)]
    json: bool,
    /// Indented JSON.
    #[arg(long)]
    pretty: bool,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Loads a problem; tolerances resolve as defaults, then environment, then file, then flags.
fn load(file: &Path, tol: &TolArgs) -> Result<(Problem, Tolerances)> {
    let base = Tolerances::from_env();
    let flags = ToleranceOverrides { eps_eq: tol.eps_eq, eps_rank: tol.eps_rank, eps_recon: None };
    let p = Problem::parse(&read(file)?, base)?;
    let resolved = flags.apply(p.tolerances(base));
    io::validate_tolerances(&resolved, "flags")?;
    Ok((p, resolved))
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Error::Schema(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Check { file, analyses, candidate, tol, format } => {
            let (p, tol) = load(&file, &tol)?;
            let requested = analyses.as_deref().map(parse_analyses).transpose()?;
            let list = p.resolve_analyses(requested.as_deref())?;
            let mut report = problem::run(&p, &list, &tol)?;
            if let Some(path) = candidate {
                let g = io::channel_from_json(&io::parse_json(&read(&path)?)?, "candidate")?;
                report.body["candidate"] = check_candidate(&p, &g, &tol)?;
            }
            emit(&(report.render(format.pretty) + "\n"))?;
        }
        Command::Invert { file, mode, out, tol, format } => {
            let (p, tol) = load(&file, &tol)?;
            let hom = p.channel.hom().is_some();
            let list = match mode {
                Mode::Bayes => vec![Analysis::BayesExistence],
                Mode::Disint if hom => vec![Analysis::Disintegrate],
                Mode::Disint => vec![Analysis::BayesExistence, Analysis::Bridge],
            };
            let mut report = problem::run(&p, &list, &tol)?;
            let built = match mode {
                Mode::Bayes => report.constructed.inverse.clone(),
                Mode::Disint if hom => report.constructed.disintegration.clone(),
                Mode::Disint => {
                    let holds = report.analysis(Analysis::Bridge).map(|b| b["disintegration"]["holds"] == true);
                    if holds == Some(true) {
                        report.constructed.inverse.clone()
                    } else {
                        None
                    }
                }
            };
            let mode_name = match mode {
                Mode::Bayes => "bayes",
                Mode::Disint => "disint",
            };
            report.body["output"] = match &built {
                Some(g) => {
                    write(&out, &(io::to_pretty(&io::channel_to_json(g)) + "\n"))?;
                    json!({ "mode": mode_name, "written": true, "path": out.display().to_string() })
                }
                None => json!({ "mode": mode_name, "written": false }),
            };
            if let Some(g) = &built {
                report.body["candidate"] = check_candidate(&p, g, &tol)?;
            }
            emit(&(report.render(format.pretty) + "\n"))?;
        }
        Command::Random { dims, kind, seed, out } => {
            let kind: RandomKind = kind.parse()?;
            let text = problem::random_problem(kind, &dims, seed)?.to_string_pretty() + "\n";
            match out {
                Some(path) => write(&path, &text)?,
                None => emit(&text)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_input_error() { 2 } else { 3 };
            eprintln!("{}", json!({ "error": e.to_string(), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}
