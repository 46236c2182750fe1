//! `ks picard`: the Duhamel fixed point by Picard iteration.
//!
//! On contraction the converged slab goes out as a KSF1 checkpoint (one
//! snapshot per time node plus an index file) and the iteration history as
//! a text report. A non-contracting iteration exits 4 and quotes a
//! relaxation time expected to work; nothing is written in that case.

use std::fs;
use std::path::Path;

use kslab::{picard_solve, ExponentSet, SlabStart};

use crate::config::{OutputFormat, RunConfig, SolverMode};
use crate::errors::CliError;
use crate::manifest::RunManifest;
use crate::output;

pub fn run(config_path: &Path, out_flag: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let cfg = RunConfig::load(config_path)?;
    if cfg.solver.mode != SolverMode::Picard {
        return Err(CliError::Config(
            "solver.mode is \"evolution\"; run `ks simulate` for the time stepper".into(),
        ));
    }
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let u0 = cfg.measure(grid)?;
    // gate the exponents before any work; the window errors name the bound
    let exponents = ExponentSet::new(cfg.solver.p, cfg.solver.q)?;
    let tgrid = cfg.tgrid()?;

    let (slab, report) = picard_solve(
        &u0,
        grid,
        tgrid,
        &params,
        exponents.p(),
        cfg.solver.tol,
        cfg.solver.max_iter,
    )?;
    if !report.converged {
        return Err(CliError::Config(format!(
            "Picard stopped after {} iterations above tolerance (last residual {:.3e}); \
             raise solver.max_iter or loosen solver.tol",
            report.iterations,
            report.residuals.last().copied().unwrap_or(f64::NAN)
        )));
    }

    let dir = output::resolve_dir(out_flag, cfg.output.directory.as_deref());
    output::ensure_dir(&dir)?;
    let mut manifest = RunManifest::new("picard", seed);
    let triple = slab.triple_norm(exponents.p())?;

    let report_path = dir.join("picard_report.txt");
    let mut text = format!(
        "converged = {}\niterations = {}\ncontraction_ratio = {:.6}\n\
         triple_norm (p = {}) = {:.8e}\nresiduals:\n",
        report.converged,
        report.iterations,
        report.contraction_ratio,
        exponents.p(),
        triple
    );
    for (i, r) in report.residuals.iter().enumerate() {
        text.push_str(&format!("  {} {:.8e}\n", i + 1, r));
    }
    fs::write(&report_path, text)?;
    manifest.push_output(&report_path);

    if cfg.wants(OutputFormat::Ksf) {
        let index = kslab::write_slab_checkpoint(&dir, "slab", &slab, &params)?;
        manifest.push_output(&index);
        // node files follow the index stem convention
        if !matches!(slab.start(), SlabStart::Singular) {
            manifest.push_output(&dir.join("slab_0000.ksf"));
        }
        for j in 1..=slab.tgrid().len() {
            manifest.push_output(&dir.join(format!("slab_{j:04}.ksf")));
        }
    }

    println!(
        "converged in {} iterations, contraction ratio {:.3}, triple norm (p = {}) {:.6e}",
        report.iterations,
        report.contraction_ratio,
        exponents.p(),
        triple
    );
    manifest.verdict = "converged".into();
    manifest.config = Some(cfg);
    manifest.write(&dir)?;
    Ok(())
}
