//! Running selected suites and writing their reports.

use std::path::{Path, PathBuf};
use std::thread;

use crate::config::{RunConfig, SuiteName, OUT_DIR_ENV};
use crate::error::CliResult;
use crate::report::{write_all, SuiteReport, Summary};
use crate::suites::run_suite;

#[derive(Debug)]
pub struct RunOutcome {
    /// Reports in suite order.
    pub reports: Vec<SuiteReport>,
    pub summary: Summary,
    /// Written files, summary last.
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.summary.all_passed {
            0
        } else {
            1
        }
    }
}

/// `--out`, then the config's `out_dir`, then the environment, then
/// `./cylspec-out`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cylspec-out"))
}

/// Runs the suites chosen by `explicit` (or the config) and writes one
/// report per suite followed by the summary.
pub fn run(cfg: &RunConfig, explicit: &[SuiteName], out: &Path, sequential: bool) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let suites = cfg.selected(explicit);
    let results: Vec<CliResult<SuiteReport>> = if sequential || suites.len() < 2 {
        suites.iter().map(|&s| run_suite(s, cfg)).collect()
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = suites.iter().map(|&s| scope.spawn(move || run_suite(s, cfg))).collect();
            handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect()
        })
    };
    let reports = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let summary = Summary::from_reports(cfg, &reports);
    let files = write_all(out, &reports, &summary)?;
    Ok(RunOutcome { reports, summary, files })
}
