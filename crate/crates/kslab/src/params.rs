//! Physical parameters of the chemotaxis system.

use crate::error::{KsError, Result};

/// Relaxation time `tau` of the chemical field and its damping rate `gamma`.
///
/// The cell density diffuses with unit diffusivity; the chemical solves
/// tau * v_t = laplacian(v) - gamma * v + u. Larger `tau` slows the chemical
/// response and weakens the nonlinear coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub tau: f64,
    pub gamma: f64,
}

impl Params {
    pub fn new(tau: f64, gamma: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(KsError::InvalidArgument(format!(
                "tau = {tau} must be positive and finite"
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(KsError::InvalidArgument(format!(
                "gamma = {gamma} must be nonnegative and finite"
            )));
        }
        Ok(Self { tau, gamma })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_ranges() {
        assert!(Params::new(1.0, 0.0).is_ok());
        assert!(Params::new(0.0, 0.0).is_err());
        assert!(Params::new(-1.0, 0.0).is_err());
        assert!(Params::new(1.0, -0.5).is_err());
        assert!(Params::new(f64::INFINITY, 0.0).is_err());
        assert!(Params::new(1.0, f64::NAN).is_err());
    }
}
