//! Run configuration: nested TOML read by `simulate` and `picard`.
//!
//! ```toml
//! [grid]
//! n = 128                     # grid points per side (even)
//! l = 20.0                    # box side length
//!
//! [params]
//! tau = 10.0
//! gamma = 0.0
//!
//! [init]
//! # background = "field.ksf"  # optional KSF1 snapshot; its density adds in
//! atoms = [{ mass = 12.566, x = 0.0, y = 0.0, width = 0.5 }]
//!
//! [time]
//! t_end = 1.0
//! dt_init = 1e-4              # evolution step seed (default t_end * 1e-4)
//! kappa = 2.0                 # Picard time-grid grading (default 2)
//! n_t = 64                    # Picard time nodes (default 64)
//!
//! [solver]
//! mode = "evolution"          # or "picard"
//! p = 1.5                     # solution-space exponent
//! q = 4.0                     # companion exponent, checked for picard
//! tol = 1e-8
//! max_iter = 40
//!
//! [output]
//! directory = "runs/diffuse"  # default: KS_OUT_DIR, then ./ks-out
//! snapshots = [0.5, 1.0]
//! formats = ["csv", "ksf"]    # any of csv, ksf, gnuplot
//!
//! [blowup]                    # optional; defaults are 1e6 and 0.01
//! sup_factor = 10.0
//! tail_limit = 0.2
//! ```
//!
//! The atom list may also be written as repeated `[[init.atoms]]` tables.
//! Unknown keys anywhere are errors, so a typo cannot silently fall back to
//! a default. Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kslab::{read_snapshot, Atom, Grid2D, MollifiedMeasure, Params, StepController, TimeGrid};

use crate::errors::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub params: ParamsSection,
    pub init: InitSection,
    pub time: TimeSection,
    pub solver: SolverSection,
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup: Option<BlowupSection>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub tau: f64,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<PathBuf>,
}

/// One point mass; positions default to the origin.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub mass: f64,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Evolution,
    Picard,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub mode: SolverMode,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_p() -> f64 {
    1.5
}
fn default_q() -> f64 {
    4.0
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    40
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Ksf]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Ksf,
    Gnuplot,
}

/// Detector overrides for exploratory runs near the critical mass.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupSection {
    pub sup_factor: f64,
    pub tail_limit: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(bg) = &mut cfg.init.background {
            if bg.is_relative() {
                *bg = base.join(&*bg);
            }
            if !bg.exists() {
                return Err(CliError::Config(format!(
                    "background field {} does not exist",
                    bg.display()
                )));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let t_end = self.time.t_end;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(CliError::Config(format!(
                "time.t_end must be positive and finite, got {t_end}"
            )));
        }
        for &s in &self.output.snapshots {
            if !(s > 0.0 && s <= t_end) {
                return Err(CliError::Config(format!(
                    "snapshot time {s} outside (0, t_end = {t_end}]"
                )));
            }
        }
        if let Some(dt) = self.time.dt_init {
            if !(dt > 0.0 && dt <= t_end) {
                return Err(CliError::Config(format!(
                    "time.dt_init must lie in (0, t_end], got {dt}"
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D, CliError> {
        Ok(Grid2D::new(self.grid.n, self.grid.l)?)
    }

    pub fn params(&self) -> Result<Params, CliError> {
        Ok(Params::new(self.params.tau, self.params.gamma)?)
    }

    /// Assembles the initial measure, loading the background snapshot when
    /// one is named; its grid must match the configured grid.
    pub fn measure(&self, grid: Grid2D) -> Result<MollifiedMeasure, CliError> {
        let mut m = MollifiedMeasure::new();
        for a in &self.init.atoms {
            m.push_atom(Atom {
                mass: a.mass,
                x: a.x,
                y: a.y,
                width: a.width,
            });
        }
        if let Some(path) = &self.init.background {
            let snap = read_snapshot(path)?;
            if snap.grid != grid {
                return Err(CliError::Config(format!(
                    "background grid {} differs from the configured {grid}",
                    snap.grid
                )));
            }
            m = m.with_background(snap.u);
        }
        Ok(m)
    }

    /// Adaptive controller seeded at `dt_init` inside the default envelope.
    pub fn controller(&self) -> Result<StepController, CliError> {
        let mut ctrl = StepController::default_for(self.time.t_end);
        if let Some(dt) = self.time.dt_init {
            ctrl.dt = dt.min(ctrl.dt_max);
            ctrl.dt_min = ctrl.dt_min.min(ctrl.dt);
        }
        Ok(ctrl)
    }

    pub fn tgrid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(
            self.time.t_end,
            self.time.n_t.unwrap_or(64),
            self.time.kappa.unwrap_or(2.0),
        )?)
    }

    pub fn wants(&self, fmt: OutputFormat) -> bool {
        self.output.formats.contains(&fmt)
    }
}
