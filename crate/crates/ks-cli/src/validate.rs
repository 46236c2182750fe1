//! `ks validate`: the acceptance suite as a subcommand, plus an integrity
//! scan over stored artifacts.
//!
//! Criteria run at their contract tolerances; `--reduced` shrinks grids for
//! a smoke pass and prints every tolerance it scales. `--snapshots DIR`
//! first re-reads every KSF1 snapshot and slab index under DIR, naming each
//! unreadable file; corrupt artifacts fail the command before any criterion
//! runs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use kslab::{read_slab_checkpoint, read_snapshot, run_criterion, CRITERION_COUNT};

use crate::errors::CliError;

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Smoke mode: smaller grids, scaled tolerances, warnings printed.
    #[arg(long)]
    pub reduced: bool,

    /// Subset of criteria to run, by number (default: all 12).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<usize>,

    /// Directory of stored snapshots to integrity-check first.
    #[arg(long, value_name = "DIR")]
    pub snapshots: Option<PathBuf>,
}

pub fn run(args: &ValidateArgs) -> Result<(), CliError> {
    if let Some(dir) = &args.snapshots {
        scan_artifacts(dir)?;
    }
    let ids: Vec<usize> = if args.criteria.is_empty() {
        (1..=CRITERION_COUNT).collect()
    } else {
        args.criteria.clone()
    };
    for &id in &ids {
        if !(1..=CRITERION_COUNT).contains(&id) {
            return Err(CliError::Config(format!(
                "criterion {id} does not exist; valid numbers are 1..{CRITERION_COUNT}"
            )));
        }
    }
    let mut failed = 0usize;
    for &id in &ids {
        let outcome = run_criterion(id, args.reduced);
        println!("{}", outcome.summary_line());
        for w in &outcome.warnings {
            println!("    warning: {w}");
        }
        if !outcome.passed {
            failed += 1;
        }
    }
    println!("passed {} of {}", ids.len() - failed, ids.len());
    if failed > 0 {
        return Err(CliError::CriteriaFailed {
            failed,
            ran: ids.len(),
        });
    }
    Ok(())
}

/// Re-reads every artifact under `dir`: `.ksf` files through the snapshot
/// reader, `.index` files through the slab reader (which also re-reads the
/// node snapshots it names and cross-checks their time stamps).
fn scan_artifacts(dir: &Path) -> Result<(), CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
    paths.sort();
    let mut checked = 0usize;
    let mut corrupt = 0usize;
    for path in paths {
        let verdict = match path.extension().and_then(|s| s.to_str()) {
            Some("ksf") => read_snapshot(&path).map(|_| ()),
            Some("index") => read_slab_checkpoint(&path).map(|_| ()),
            _ => continue,
        };
        checked += 1;
        if let Err(e) = verdict {
            corrupt += 1;
            eprintln!("corrupt artifact {}: {e}", path.display());
        }
    }
    if corrupt > 0 {
        return Err(CliError::CorruptArtifacts(corrupt));
    }
    println!("artifact scan: {checked} files intact under {}", dir.display());
    Ok(())
}
