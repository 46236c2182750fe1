//! Uniform periodic grid on the square box [-l/2, l/2)^2.
//!
//! The plane is truncated to a periodic box of side `l` sampled at `n x n`
//! points. All spectral operations index Fourier modes by the signed integer
//! frequency m in [-n/2, n/2), with physical wavenumber k = 2*pi*m / l.

use crate::error::{KsError, Result};

/// Side length and sampling count of the periodic box.
///
/// `n` must be a power of two, at least 16, so the 2/3-rule dealiasing mask
/// and the FFT sizes stay exact; `l` must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n: usize,
    l: f64,
}

impl Grid2D {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(KsError::InvalidArgument(format!(
                "grid size n = {n} must be a power of two >= 16"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(KsError::InvalidArgument(format!(
                "box side l = {l} must be positive and finite"
            )));
        }
        Ok(Self { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Mesh width l/n.
    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Physical coordinate of sample index i along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.l + i as f64 * self.spacing()
    }

    /// Signed integer frequency for FFT bin i: 0, 1, ..., n/2, -(n/2-1), ..., -1.
    /// Bin n/2 is the Nyquist frequency.
    pub fn freq_index(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Physical wavenumber of FFT bin i.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.freq_index(i) as f64 / self.l
    }

    /// True when bin i holds the Nyquist frequency, which every derivative
    /// multiplier zeroes to keep odd derivatives real.
    pub fn is_nyquist(&self, i: usize) -> bool {
        2 * i == self.n
    }

    /// Largest signed frequency kept by the 2/3-rule dealiasing mask.
    pub fn dealias_limit(&self) -> i64 {
        (self.n / 3) as i64
    }
}

impl std::fmt::Display for Grid2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{} box of side {}", self.n, self.n, self.l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid2D::new(10, 1.0).is_err());
        assert!(Grid2D::new(48, 1.0).is_err());
        assert!(Grid2D::new(8, 1.0).is_err());
        assert!(Grid2D::new(64, 0.0).is_err());
        assert!(Grid2D::new(64, -3.0).is_err());
        assert!(Grid2D::new(64, f64::NAN).is_err());
        assert!(Grid2D::new(64, 10.0).is_ok());
    }

    #[test]
    fn frequencies_cover_signed_range() {
        let g = Grid2D::new(16, 2.0).unwrap();
        let m: Vec<i64> = (0..16).map(|i| g.freq_index(i)).collect();
        assert_eq!(m[0], 0);
        assert_eq!(m[8], 8); // Nyquist
        assert_eq!(m[9], -7);
        assert_eq!(m[15], -1);
        assert!(g.is_nyquist(8));
        assert!(!g.is_nyquist(7));
    }

    #[test]
    fn coords_span_centered_box() {
        let g = Grid2D::new(16, 8.0).unwrap();
        assert_eq!(g.coord(0), -4.0);
        assert_eq!(g.coord(8), 0.0);
        assert!(g.coord(15) < 4.0);
        assert_eq!(g.spacing(), 0.5);
    }
}
