//! Finite measures as initial data: weighted atoms plus an optional smooth
//! background, realized on a grid by mollification.
//!
//! An atom of mass M and width eps becomes the Gaussian M * G(x - c, eps^2/2),
//! the heat evolution of a point mass at time eps^2/2. Realization happens in
//! Fourier space, so the integral of the realized field equals the total mass
//! exactly, independent of the grid.

use crate::error::{KsError, Result};
use crate::field::{combine, gauss_kernel, SpectralField};
use crate::grid::Grid2D;

/// A point mass with its mollification width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub mass: f64,
    pub x: f64,
    pub y: f64,
    /// Mollification width eps; the realized Gaussian has spread eps^2/2.
    pub width: f64,
}

/// Atoms plus an optional background density. Signed masses are allowed.
#[derive(Debug, Clone, Default)]
pub struct MollifiedMeasure {
    atoms: Vec<Atom>,
    background: Option<SpectralField>,
}

impl MollifiedMeasure {
    pub fn new() -> Self {
        Self::default()
    }

    /// A single atom at the origin, the usual starting point.
    pub fn atom(mass: f64, width: f64) -> Self {
        let mut m = Self::new();
        m.push_atom(Atom {
            mass,
            x: 0.0,
            y: 0.0,
            width,
        });
        m
    }

    pub fn push_atom(&mut self, atom: Atom) -> &mut Self {
        self.atoms.push(atom);
        self
    }

    pub fn with_background(mut self, background: SpectralField) -> Self {
        self.background = Some(background);
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn background(&self) -> Option<&SpectralField> {
        self.background.as_ref()
    }

    /// Total mass: sum of atom masses plus the background integral.
    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass).sum();
        atoms + self.background.as_ref().map_or(0.0, |b| b.mass())
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.background.is_none()
    }
}

/// Realizes the measure on `grid` as a sum of mollified atoms plus the
/// background. Every atom must sit inside the box and carry a width of at
/// least two grid spacings; violations name the offending atom.
pub fn realize_measure(m: &MollifiedMeasure, grid: Grid2D) -> Result<SpectralField> {
    let half = grid.l() / 2.0;
    let min_width = 2.0 * grid.spacing();
    for (index, atom) in m.atoms().iter().enumerate() {
        if !(atom.mass.is_finite() && atom.x.is_finite() && atom.y.is_finite()) {
            return Err(KsError::NotFinite(format!("atom {index}")));
        }
        if atom.x.abs() >= half || atom.y.abs() >= half {
            return Err(KsError::AtomOutsideBox {
                index,
                x: atom.x,
                y: atom.y,
                half,
            });
        }
        if !(atom.width.is_finite()) || atom.width < min_width {
            return Err(KsError::UnresolvedAtom {
                index,
                width: atom.width,
                min_width,
            });
        }
    }
    if let Some(bg) = m.background() {
        if bg.grid() != grid {
            return Err(KsError::GridMismatch {
                expected: grid,
                found: bg.grid(),
            });
        }
    }

    let mut field = SpectralField::zero(grid);
    for atom in m.atoms() {
        let spread = 0.5 * atom.width * atom.width;
        let g = gauss_kernel(grid, atom.mass, (atom.x, atom.y), spread)?;
        field = combine(1.0, &field, 1.0, &g)?;
    }
    if let Some(bg) = m.background() {
        field = combine(1.0, &field, 1.0, bg)?;
    }
    Ok(field)
}
