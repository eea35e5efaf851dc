use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cylspec_cli::commands::{self, CalliasArgs, Potential};
use cylspec_cli::config::{OperatorSpec, OUT_DIR_ENV};
use cylspec_cli::run::resolve_out_dir;
use cylspec_cli::{plot, run, CliError, CliResult, RunConfig, SuiteName};

#[derive(Parser)]
#[command(name = "cylspec", version, about = "Numerical checks for Dirac-type operators on cylinders")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run verification suites and write JSON reports.
    Verify {
        /// Suites to run; defaults to the config's list, else all.
        suites: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, long_help = format!("Output directory; falls back to the config, then ${OUT_DIR_ENV}, then ./cylspec-out"))]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Run suites one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Index of the configured two-ended flow instance.
    Index {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Pointwise Callias or para-Callias check of a potential.
    Callias {
        /// CSV file (`x,v` or `x,a,b,c`) or an expression in `x`.
        #[arg(long)]
        potential: String,
        /// Compact set as `a,b`; omit for the empty set.
        #[arg(long = "K", value_parser = pair, allow_hyphen_values = true)]
        k: Option<(f64, f64)>,
        #[arg(long = "Lambda")]
        lambda: f64,
        #[arg(long)]
        para: bool,
        /// Pauli index of the symbol; 0 is the identity. It must commute with
        /// the potential for the zeroth-order condition to hold.
        #[arg(long, default_value_t = 0)]
        gamma: usize,
        #[arg(long = "x-range", value_parser = pair, default_value = "-6,6", allow_hyphen_values = true)]
        x_range: (f64, f64),
        #[arg(long, default_value_t = 1201)]
        samples: usize,
    },
    /// Print a CSV table from a suite report.
    Plot {
        report: PathBuf,
        /// rellich, h1_embedding, constants or callias_margins.
        kind: String,
    },
}

fn pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `a,b`")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn load(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::new(OperatorSpec::CircleDirac { n_modes: 4, shift: 0.0, potential: None })),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text)
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn dispatch(cmd: Cmd) -> CliResult<u8> {
    match cmd {
        Cmd::Verify { suites, config, out, seed, sequential } => {
            let mut cfg = load(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let explicit = suites.iter().map(|s| SuiteName::parse(s)).collect::<CliResult<Vec<_>>>()?;
            let dir = resolve_out_dir(out.as_deref(), &cfg);
            let outcome = run(&cfg, &explicit, &dir, sequential)?;
            for r in &outcome.reports {
                println!("{:<10} {:>3} passed {:>3} failed", r.suite.as_str(), r.passed, r.failed);
                for c in r.checks.iter().filter(|c| !c.passed) {
                    println!("    FAIL {} value={} threshold={}", c.name, c.value, c.threshold);
                }
            }
            println!("reports in {}", dir.display());
            Ok(outcome.exit_code())
        }
        Cmd::Index { config } => {
            let f = commands::index(&load(config.as_deref())?)?;
            println!("{}", to_json(&f));
            Ok(if f.agrees { 0 } else { 1 })
        }
        Cmd::Callias { potential, k, lambda, para, gamma, x_range, samples } => {
            let args = CalliasArgs { potential: Potential::parse(&potential)?, k, lambda, para, gamma, x_range, samples };
            let r = commands::callias(&args)?;
            println!("{}", to_json(&r));
            Ok(if r.verdict { 0 } else { 1 })
        }
        Cmd::Plot { report, kind } => {
            let text = std::fs::read_to_string(&report)?;
            print!("{}", plot::emit_plot_data(&text, &kind)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("cylspec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
