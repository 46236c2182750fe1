//! Numerical toolkit for the parabolic-parabolic Keller-Segel system on the
//! plane,
//!
//! ```text
//! u_t = div(grad u - u grad v)          u(0) = u0 (a finite measure)
//! tau v_t = laplacian v - gamma v + u   v(0) = 0
//! ```
//!
//! solved on a large periodic box. The crate provides four complementary
//! views of the same dynamics:
//!
//! - [`field`]: spectral fields, heat propagators and mollified measures;
//! - [`mild`]: the Duhamel fixed-point formulation and its Picard iteration,
//!   discretized by product integration on a graded time grid;
//! - [`evolution`]: a direct IMEX pseudospectral integrator;
//! - [`selfsim`]: radial self-similar profiles, mass curves and the
//!   non-uniqueness threshold in the relaxation time;
//!
//! with [`estimates`] quantifying the smoothing and bilinear bounds that make
//! the fixed-point argument work, and [`suite`] bundling the acceptance
//! checks run by the command-line `validate` subcommand.

pub mod error;
pub mod estimates;
pub mod evolution;
mod fft;
pub mod field;
pub mod grid;
pub mod ksf;
pub mod measure;
pub mod mild;
pub mod params;
pub mod selfsim;
pub mod suite;

pub use error::{KsError, Result};
pub use estimates::{
    admissible_window, beta_constant, eta_empirical, weak_attainment_probe, EtaModel,
    EtaProbeSettings, ExponentSet, QuadraticToy, TestFunction,
};
pub use evolution::{
    run, run_state, self_similarity_residual, spectral_tail_fraction, step, BlowupDetector,
    BlowupVerdict, EvolutionState, RunOutput, RunStatus, SeriesRow, StepController,
};
pub use field::{
    combine, dealiased_product, divergence, gauss_kernel, gradient, heat_propagate, lp_norm,
    screened_propagate, SpectralField, VectorField2D,
};
pub use grid::Grid2D;
pub use ksf::{
    read_slab_checkpoint, read_snapshot, write_slab_checkpoint, write_snapshot, write_state,
    Snapshot,
};
pub use measure::{realize_measure, Atom, MollifiedMeasure};
pub use mild::{
    apply_b, apply_l, bilinear_slab, duhamel_rhs, picard_solve, picard_solve_from, suggest_tau,
    PicardReport, SlabStart, TimeGrid, TimeSlab,
};
pub use params::Params;
pub use selfsim::{
    find_tau_star, integrate_profile, m_tau_trend, mass_curve, profile_to_initial_state,
    MassCurve, MassPair, MassSample, OdeSettings, RadialProfile, TrendPoint,
};
pub use suite::{criterion_name, run_all, run_criterion, CriterionOutcome, CRITERION_COUNT};
