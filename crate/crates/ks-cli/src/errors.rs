//! Error type and the exit-code contract of the binary.

use kslab::KsError;

/// Anything a subcommand can fail with. The exit code is part of the
/// interface, scripts branch on it, so every failure path maps to a
/// documented value and nothing exits zero silently.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, a bad configuration file, or a missing referenced file.
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Lib(#[from] KsError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// The run ended with the blowup heuristics firing; outputs up to the
    /// event are on disk together with the manifest.
    #[error("blowup suspected at t = {t_event:.6}; partial outputs and manifest written")]
    Blowup { t_event: f64 },

    #[error("resolution lost at t = {t_event:.6}; partial outputs and manifest written")]
    ResolutionLost { t_event: f64 },

    #[error("{failed} of {ran} acceptance criteria failed")]
    CriteriaFailed { failed: usize, ran: usize },

    #[error("{0} corrupt artifact file(s), named above")]
    CorruptArtifacts(usize),
}

impl CliError {
    /// 0 success, 1 configuration or validation failure, 2 blowup
    /// suspected, 3 resolution lost, 4 Picard non-contraction.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Blowup { .. } => 2,
            CliError::ResolutionLost { .. } => 3,
            CliError::Lib(KsError::NonContraction { .. }) => 4,
            CliError::Lib(KsError::StepUnderflow { .. }) => 3,
            _ => 1,
        }
    }
}
