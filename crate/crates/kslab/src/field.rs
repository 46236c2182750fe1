//! Real scalar and vector fields on the periodic box, stored with a lazily
//! cached Fourier transform.
//!
//! Fields are immutable once built: every operation returns a fresh field, so
//! solvers can share inputs across threads freely. The coefficient cache is
//! populated on first use behind a `OnceLock`, which keeps the observable
//! state of a field independent of when (or whether) its spectrum was needed.
//!
//! Conventions:
//! - `coeffs = DFT(values)` unnormalized, so `coeffs[[0, 0]] * spacing^2` is
//!   the integral of the field over the box;
//! - `values[[iy, ix]]` samples the point `(coord(ix), coord(iy))`;
//! - derivative multipliers zero the Nyquist frequency;
//! - products are dealiased by the 2/3 rule (inputs and output truncated).

use crate::error::{KsError, Result};
use crate::fft;
use crate::grid::Grid2D;
use crate::params::Params;
use ndarray::Array2;
use rustfft::num_complex::Complex64;
use std::sync::{Arc, OnceLock};

/// A real field together with its (lazily computed) Fourier coefficients.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid2D,
    values: Arc<Array2<f64>>,
    coeffs: OnceLock<Arc<Array2<Complex64>>>,
}

impl SpectralField {
    /// Wraps sample values, rejecting shape mismatches and non-finite entries.
    pub fn from_values(grid: Grid2D, values: Array2<f64>) -> Result<Self> {
        let n = grid.n();
        if values.dim() != (n, n) {
            return Err(KsError::InvalidArgument(format!(
                "value array of shape {:?} does not match {grid}",
                values.dim()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(KsError::NotFinite("field values".into()));
        }
        Ok(Self {
            grid,
            values: Arc::new(values),
            coeffs: OnceLock::new(),
        })
    }

    /// Builds a field from Fourier coefficients. Conjugate symmetry is
    /// enforced by averaging each bin with its mirrored conjugate, so the
    /// result is exactly real; exactly symmetric inputs pass through bitwise.
    pub fn from_coeffs(grid: Grid2D, coeffs: Array2<Complex64>) -> Result<Self> {
        let n = grid.n();
        if coeffs.dim() != (n, n) {
            return Err(KsError::InvalidArgument(format!(
                "coefficient array of shape {:?} does not match {grid}",
                coeffs.dim()
            )));
        }
        let mut sym = Array2::default((n, n));
        for i in 0..n {
            let mi = (n - i) % n;
            for j in 0..n {
                let mj = (n - j) % n;
                sym[[i, j]] = 0.5 * (coeffs[[i, j]] + coeffs[[mi, mj]].conj());
            }
        }
        if !sym.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(KsError::NotFinite("field coefficients".into()));
        }
        let (values, _imag) = fft::inverse_real(&sym);
        let field = Self {
            grid,
            values: Arc::new(values),
            coeffs: OnceLock::new(),
        };
        let _ = field.coeffs.set(Arc::new(sym));
        Ok(field)
    }

    pub fn zero(grid: Grid2D) -> Self {
        let n = grid.n();
        let field = Self {
            grid,
            values: Arc::new(Array2::zeros((n, n))),
            coeffs: OnceLock::new(),
        };
        let _ = field.coeffs.set(Arc::new(Array2::default((n, n))));
        field
    }

    /// Samples a continuum Fourier transform `spectrum(kx, ky)` at the box
    /// wavenumbers. The Nyquist row and column are dropped so the result is
    /// exactly representable. Intended for analytically known probes; no
    /// resolution check is applied.
    pub fn from_spectrum(
        grid: Grid2D,
        spectrum: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let n = grid.n();
        let scale = (n * n) as f64 / (grid.l() * grid.l());
        let mut coeffs = Array2::default((n, n));
        for iy in 0..n {
            if grid.is_nyquist(iy) {
                continue;
            }
            let ky = grid.wavenumber(iy);
            let my = grid.freq_index(iy);
            for ix in 0..n {
                if grid.is_nyquist(ix) {
                    continue;
                }
                let kx = grid.wavenumber(ix);
                // Phase shift from the DFT origin to the box center: with
                // k = 2 pi m / l the factor exp(-i k l / 2) is exactly (-1)^m.
                let sign = if (my + grid.freq_index(ix)) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                coeffs[[iy, ix]] = spectrum(kx, ky) * (scale * sign);
            }
        }
        Self::from_coeffs(grid, coeffs)
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Fourier coefficients, computed on first access.
    pub fn coeffs(&self) -> &Array2<Complex64> {
        self.coeffs.get_or_init(|| Arc::new(fft::forward(&self.values)))
    }

    /// Integral of the field over the box (rectangle rule, which is exact
    /// for the trigonometric interpolant).
    pub fn mass(&self) -> f64 {
        let h = self.grid.spacing();
        self.values.sum() * h * h
    }

    /// Fraction of the absolute mass lying outside the centered disk of
    /// radius l/4. Runs that push mass past this radius are leaving the
    /// regime where the periodic box approximates the plane.
    pub fn domain_saturation(&self) -> f64 {
        let n = self.grid.n();
        let r2 = (self.grid.l() / 4.0) * (self.grid.l() / 4.0);
        let mut outside = 0.0;
        let mut total = 0.0;
        for iy in 0..n {
            let y = self.grid.coord(iy);
            for ix in 0..n {
                let x = self.grid.coord(ix);
                let a = self.values[[iy, ix]].abs();
                total += a;
                if x * x + y * y > r2 {
                    outside += a;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outside / total
        }
    }
}

/// A two-component vector field with both components on the same grid.
#[derive(Debug, Clone)]
pub struct VectorField2D {
    pub x: SpectralField,
    pub y: SpectralField,
}

impl VectorField2D {
    pub fn new(x: SpectralField, y: SpectralField) -> Result<Self> {
        if x.grid() != y.grid() {
            return Err(KsError::GridMismatch {
                expected: x.grid(),
                found: y.grid(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn grid(&self) -> Grid2D {
        self.x.grid()
    }

    /// Pointwise Euclidean sup norm over the grid.
    pub fn sup_norm(&self) -> f64 {
        self.x
            .values()
            .iter()
            .zip(self.y.values().iter())
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }
}

fn check_same_grid(f: &SpectralField, g: &SpectralField) -> Result<()> {
    if f.grid() != g.grid() {
        return Err(KsError::GridMismatch {
            expected: f.grid(),
            found: g.grid(),
        });
    }
    Ok(())
}

/// Applies a real Fourier multiplier given as a function of |k|^2.
pub(crate) fn apply_radial_multiplier(
    f: &SpectralField,
    mult: impl Fn(f64) -> f64,
) -> SpectralField {
    let grid = f.grid();
    let n = grid.n();
    let coeffs = f.coeffs();
    let mut out = Array2::default((n, n));
    for iy in 0..n {
        let ky = grid.wavenumber(iy);
        for ix in 0..n {
            let kx = grid.wavenumber(ix);
            out[[iy, ix]] = coeffs[[iy, ix]] * mult(kx * kx + ky * ky);
        }
    }
    SpectralField::from_coeffs(grid, out).expect("multiplier preserves validity")
}

/// Heat semigroup e^{t Laplacian}. The zero-frequency coefficient is
/// untouched, so mass is preserved exactly; `t = 0` is the identity.
pub fn heat_propagate(f: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(KsError::InvalidArgument(format!(
            "heat propagation time t = {t} must be nonnegative"
        )));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(apply_radial_multiplier(f, |k2| (-k2 * t).exp()))
}

/// Screened heat semigroup e^{ (dt/tau) (Laplacian - gamma) } used by the
/// chemical field.
pub fn screened_propagate(f: &SpectralField, dt: f64, params: &Params) -> Result<SpectralField> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(KsError::InvalidArgument(format!(
            "screened propagation time dt = {dt} must be nonnegative"
        )));
    }
    if dt == 0.0 {
        return Ok(f.clone());
    }
    let rate = dt / params.tau;
    let gamma = params.gamma;
    Ok(apply_radial_multiplier(f, |k2| (-(k2 + gamma) * rate).exp()))
}

/// Spectral gradient with the Nyquist frequency zeroed in each direction.
pub(crate) fn grad_coeffs(
    grid: Grid2D,
    coeffs: &Array2<Complex64>,
) -> (Array2<Complex64>, Array2<Complex64>) {
    let n = grid.n();
    let mut gx = Array2::default((n, n));
    let mut gy = Array2::default((n, n));
    for iy in 0..n {
        let ky = if grid.is_nyquist(iy) {
            0.0
        } else {
            grid.wavenumber(iy)
        };
        for ix in 0..n {
            let kx = if grid.is_nyquist(ix) {
                0.0
            } else {
                grid.wavenumber(ix)
            };
            let c = coeffs[[iy, ix]];
            gx[[iy, ix]] = Complex64::new(0.0, kx) * c;
            gy[[iy, ix]] = Complex64::new(0.0, ky) * c;
        }
    }
    (gx, gy)
}

pub(crate) fn div_coeffs(
    grid: Grid2D,
    cx: &Array2<Complex64>,
    cy: &Array2<Complex64>,
) -> Array2<Complex64> {
    let n = grid.n();
    let mut out = Array2::default((n, n));
    for iy in 0..n {
        let ky = if grid.is_nyquist(iy) {
            0.0
        } else {
            grid.wavenumber(iy)
        };
        for ix in 0..n {
            let kx = if grid.is_nyquist(ix) {
                0.0
            } else {
                grid.wavenumber(ix)
            };
            out[[iy, ix]] = Complex64::new(0.0, kx) * cx[[iy, ix]]
                + Complex64::new(0.0, ky) * cy[[iy, ix]];
        }
    }
    out
}

pub fn gradient(f: &SpectralField) -> VectorField2D {
    let grid = f.grid();
    let (gx, gy) = grad_coeffs(grid, f.coeffs());
    VectorField2D {
        x: SpectralField::from_coeffs(grid, gx).expect("gradient preserves validity"),
        y: SpectralField::from_coeffs(grid, gy).expect("gradient preserves validity"),
    }
}

/// Spectral divergence, the adjoint convention of [`gradient`]: the zero
/// mode of the result vanishes identically, so divergence-form terms can
/// never create or destroy mass.
pub fn divergence(w: &VectorField2D) -> SpectralField {
    let grid = w.grid();
    let out = div_coeffs(grid, w.x.coeffs(), w.y.coeffs());
    SpectralField::from_coeffs(grid, out).expect("divergence preserves validity")
}

/// Zeroes every mode outside the 2/3-rule ball (including Nyquist).
pub(crate) fn truncate_coeffs(grid: Grid2D, coeffs: &Array2<Complex64>) -> Array2<Complex64> {
    let n = grid.n();
    let limit = grid.dealias_limit();
    let mut out = Array2::default((n, n));
    for iy in 0..n {
        let my = grid.freq_index(iy).abs();
        if my > limit {
            continue;
        }
        for ix in 0..n {
            if grid.freq_index(ix).abs() > limit {
                continue;
            }
            out[[iy, ix]] = coeffs[[iy, ix]];
        }
    }
    out
}

/// Dealiased pointwise product at the coefficient level: inputs truncated,
/// multiplied in physical space, result transformed and truncated again.
pub(crate) fn product_coeffs(
    grid: Grid2D,
    fc: &Array2<Complex64>,
    gc: &Array2<Complex64>,
) -> Array2<Complex64> {
    let (fv, _) = fft::inverse_real(&truncate_coeffs(grid, fc));
    let (gv, _) = fft::inverse_real(&truncate_coeffs(grid, gc));
    let prod = &fv * &gv;
    let out = fft::forward(&prod);
    truncate_coeffs(grid, &out)
}

/// Pointwise product dealiased by the 2/3 rule. Exact (up to roundoff)
/// whenever the factors are band-limited to the retained ball.
pub fn dealiased_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    check_same_grid(f, g)?;
    let coeffs = product_coeffs(f.grid(), f.coeffs(), g.coeffs());
    SpectralField::from_coeffs(f.grid(), coeffs)
}

/// Lebesgue norm on the box by the rectangle rule; `p` may be infinite.
pub fn lp_norm(f: &SpectralField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(KsError::InvalidArgument(format!(
            "Lebesgue exponent p = {p} must satisfy p >= 1"
        )));
    }
    let vals = f.values();
    if p.is_infinite() {
        return Ok(vals.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let h2 = f.grid().spacing() * f.grid().spacing();
    let sum: f64 = if p == 1.0 {
        vals.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        vals.iter().map(|v| v * v).sum()
    } else {
        vals.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * h2).powf(1.0 / p))
}

/// Linear combination a*f + b*g of fields on a common grid.
pub fn combine(a: f64, f: &SpectralField, b: f64, g: &SpectralField) -> Result<SpectralField> {
    check_same_grid(f, g)?;
    let values = f
        .values()
        .iter()
        .zip(g.values().iter())
        .map(|(x, y)| a * x + b * y)
        .collect::<Vec<_>>();
    let n = f.grid().n();
    SpectralField::from_values(
        f.grid(),
        Array2::from_shape_vec((n, n), values).expect("shape preserved"),
    )
}

/// Periodized Gauss-Weierstrass kernel: mass `m` centered at `center` with
/// spread parameter `s`, i.e. the heat evolution of a point mass at time `s`.
/// Built in Fourier space, so its integral over the box equals `m` exactly.
pub fn gauss_kernel(grid: Grid2D, m: f64, center: (f64, f64), s: f64) -> Result<SpectralField> {
    if !(s.is_finite() && s > 0.0) {
        return Err(KsError::InvalidArgument(format!(
            "kernel spread s = {s} must be positive"
        )));
    }
    if !m.is_finite() {
        return Err(KsError::NotFinite("kernel mass".into()));
    }
    let (cx, cy) = center;
    SpectralField::from_spectrum(grid, |kx, ky| {
        let k2 = kx * kx + ky * ky;
        let phase = -(kx * cx + ky * cy);
        Complex64::from_polar(m * (-k2 * s).exp(), phase)
    })
}
