//! `ks simulate`: direct time integration from a run configuration.
//!
//! Writes the per-step time series as CSV, the requested snapshots plus the
//! final state as KSF1 files, an optional gnuplot script, and the manifest.
//! The closing verdict decides the exit code; a run that trips the blowup
//! detector still leaves its partial outputs and manifest behind.

use std::path::Path;

use kslab::{run_state, BlowupDetector, EvolutionState, RunStatus, SeriesRow};

use crate::config::{OutputFormat, RunConfig, SolverMode};
use crate::errors::CliError;
use crate::manifest::RunManifest;
use crate::output;

pub fn run(config_path: &Path, out_flag: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let cfg = RunConfig::load(config_path)?;
    if cfg.solver.mode != SolverMode::Evolution {
        return Err(CliError::Config(
            "solver.mode is \"picard\"; run `ks picard` for the fixed-point solver".into(),
        ));
    }
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let u0 = cfg.measure(grid)?;
    let initial = EvolutionState::from_measure(&u0, grid, params)?;
    let detector = match &cfg.blowup {
        Some(b) => BlowupDetector::for_initial(&initial, b.sup_factor, b.tail_limit)?,
        None => BlowupDetector::defaults_for(&initial)?,
    };
    let ctrl = cfg.controller()?;
    let dir = output::resolve_dir(out_flag, cfg.output.directory.as_deref());
    output::ensure_dir(&dir)?;

    let out = run_state(initial, cfg.time.t_end, ctrl, &cfg.output.snapshots, &detector)?;

    let mut manifest = RunManifest::new("simulate", seed);
    if cfg.wants(OutputFormat::Csv) {
        let path = dir.join("series.csv");
        output::write_csv(
            &path,
            SeriesRow::CSV_HEADER,
            out.series.iter().map(|r| r.to_csv()),
        )?;
        manifest.push_output(&path);
    }
    if cfg.wants(OutputFormat::Ksf) {
        for snap in &out.snapshots {
            let path = dir.join(format!("snap_{}.ksf", snap.t));
            kslab::write_state(&path, snap)?;
            manifest.push_output(&path);
        }
        let path = dir.join("final.ksf");
        kslab::write_state(&path, &out.final_state)?;
        manifest.push_output(&path);
    }
    if cfg.wants(OutputFormat::Gnuplot) {
        let path = dir.join("series.gp");
        output::write_gnuplot(
            &path,
            "series.csv",
            "density norms",
            "t",
            "norm",
            Some("y"),
            &[
                ("1:4".into(), "L2".into()),
                ("1:5".into(), "sup".into()),
            ],
        )?;
        manifest.push_output(&path);
    }

    // weighted sup norms straight off the stored series columns
    let (mut n1, mut n2, mut ninf) = (0.0f64, 0.0f64, 0.0f64);
    for row in &out.series {
        n1 = n1.max(row.l1);
        n2 = n2.max(row.t.sqrt() * row.l2);
        ninf = ninf.max(row.t * row.linf);
    }
    println!(
        "triple norms over (0, {}]: p=1 {:.6e}, p=2 {:.6e}, p=inf {:.6e}",
        cfg.time.t_end, n1, n2, ninf
    );
    println!(
        "verdict: {} at t = {:.6}, peak sup {:.6e}",
        out.verdict.status, out.verdict.t_event, out.verdict.peak_norm
    );

    manifest.verdict = out.verdict.status.to_string();
    if out.verdict.status != RunStatus::Completed {
        manifest.t_event = Some(out.verdict.t_event);
    }
    manifest.config = Some(cfg);
    manifest.write(&dir)?;

    match out.verdict.status {
        RunStatus::Completed => Ok(()),
        RunStatus::BlowupSuspected => Err(CliError::Blowup {
            t_event: out.verdict.t_event,
        }),
        RunStatus::ResolutionLost => Err(CliError::ResolutionLost {
            t_event: out.verdict.t_event,
        }),
    }
}
