//! Radial self-similar profiles and the mass landscape in the relaxation
//! time (gamma = 0).
//!
//! Substituting u(x, t) = t^{-1} U(|x| / sqrt t), v(x, t) = V(|x| / sqrt t)
//! into the system with gamma = 0 collapses it to one radial ODE,
//!
//! ```text
//! V'' + (1/xi + tau xi / 2) V' + U = 0,    V(0) = 0, V'(0) = 0,
//! ```
//!
//! where integrating the density equation once (regularity at the origin)
//! gives the first integral U' = U (V' - xi/2), hence the closed form
//! U = a exp(V - xi^2/4) with shooting parameter a = U(0). Normalizing
//! V(0) = 0 is legitimate because gamma = 0 dynamics ignore constant shifts
//! of v. Every returned profile is validated in place: the interpolated
//! trajectory is resampled against the ODE and the first integral, and a
//! redundantly transported copy of U cross-checks the integrator.
//!
//! The total mass M(a, tau) = 2 pi int U xi dxi is carried as an extra
//! quadrature state; sweeping a maps the mass curve, whose loss of
//! monotonicity above tau* produces pairs of distinct profiles with equal
//! mass.

use crate::error::{KsError, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;
use ndarray::Array2;
use rayon::prelude::*;

/// Integrator configuration for the radial shooter.
#[derive(Debug, Clone, Copy)]
pub struct OdeSettings {
    /// Handoff radius from the origin series to the stepper.
    pub xi_start: f64,
    /// Truncation radius; the Gaussian tail beyond it is added analytically.
    pub xi_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Optional step-size ceiling (quadrature refinement studies).
    pub max_step: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            xi_start: 1e-3,
            xi_max: 20.0,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
        }
    }
}

impl OdeSettings {
    fn validate(&self) -> Result<()> {
        if !(self.xi_start > 0.0 && self.xi_start < 1.0 && self.xi_max > 1.0) {
            return Err(KsError::InvalidArgument(format!(
                "need 0 < xi_start < 1 < xi_max, got ({}, {})",
                self.xi_start, self.xi_max
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(KsError::InvalidArgument(
                "tolerances and max_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted integrator step with enough end-point data for quintic
/// Hermite reconstruction of V and W = V' in between.
#[derive(Debug, Clone, Copy)]
struct StepRecord {
    x0: f64,
    x1: f64,
    v0: f64,
    v1: f64,
    w0: f64,
    w1: f64,
    /// W' at the ends (= V'').
    dw0: f64,
    dw1: f64,
    /// W'' at the ends, from differentiating the ODE once.
    ddw0: f64,
    ddw1: f64,
}

/// A computed self-similar profile.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    a: f64,
    tau: f64,
    xi_start: f64,
    xi_max: f64,
    steps: Vec<StepRecord>,
    v_infinity: f64,
    mass: f64,
    residual_max: f64,
    first_integral_residual: f64,
    dual_route_gap: f64,
}

/// Quintic Hermite value and derivative from (f, f', f'') at both ends.
fn quintic(s: f64, h: f64, f0: f64, d0: f64, c0: f64, f1: f64, d1: f64, c1: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h20 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h21 = 0.5 * s3 - s4 + 0.5 * s5;
    let value = f0 * h00 + h * d0 * h10 + h * h * c0 * h20 + f1 * h01 + h * d1 * h11
        + h * h * c1 * h21;
    let dh00 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
    let dh10 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    let dh20 = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4;
    let dh01 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
    let dh11 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    let dh21 = 1.5 * s2 - 4.0 * s3 + 2.5 * s4;
    let deriv = (f0 * dh00 + h * d0 * dh10 + h * h * c0 * dh20 + f1 * dh01 + h * d1 * dh11
        + h * h * c1 * dh21)
        / h;
    (value, deriv)
}

impl RadialProfile {
    /// The a = 0 profile: U = 0, V = 0, returned exactly by convention.
    pub fn zero(tau: f64, settings: &OdeSettings) -> Result<Self> {
        settings.validate()?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(KsError::InvalidArgument(format!(
                "relaxation time tau = {tau} must be positive"
            )));
        }
        Ok(Self {
            a: 0.0,
            tau,
            xi_start: settings.xi_start,
            xi_max: settings.xi_max,
            steps: Vec::new(),
            v_infinity: 0.0,
            mass: 0.0,
            residual_max: 0.0,
            first_integral_residual: 0.0,
            dual_route_gap: 0.0,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Total mass 2 pi int_0^inf U xi dxi, tail-corrected.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Far-field limit of V (V is nonincreasing from V(0) = 0).
    pub fn v_infinity(&self) -> f64 {
        self.v_infinity
    }

    /// Largest scaled defect of the interpolated trajectory against the
    /// radial system, sampled inside every step.
    pub fn residual_max(&self) -> f64 {
        self.residual_max
    }

    /// Largest scaled defect of xi U' - xi U V' + (xi^2/2) U = 0.
    pub fn first_integral_residual(&self) -> f64 {
        self.first_integral_residual
    }

    /// Relative gap between the closed-form U and an independently
    /// transported copy, a global integrator cross-check.
    pub fn dual_route_gap(&self) -> f64 {
        self.dual_route_gap
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    fn series_v(&self, xi: f64) -> (f64, f64) {
        let c2 = -self.a / 4.0;
        let c4 = self.a * (self.tau + self.a + 1.0) / 64.0;
        (
            c2 * xi * xi + c4 * xi.powi(4),
            2.0 * c2 * xi + 4.0 * c4 * xi.powi(3),
        )
    }

    /// V and V' at any radius (series near 0, dense output inside the
    /// integrated range, constants beyond it).
    pub fn eval_v_and_slope(&self, xi: f64) -> (f64, f64) {
        if self.a == 0.0 || xi <= self.xi_start {
            return self.series_v(xi.max(0.0));
        }
        let last = match self.steps.last() {
            Some(s) => s.x1,
            None => return (self.v_infinity, 0.0),
        };
        if xi >= last {
            return (self.v_infinity, 0.0);
        }
        let idx = self
            .steps
            .partition_point(|s| s.x1 < xi)
            .min(self.steps.len() - 1);
        let s = &self.steps[idx];
        let h = s.x1 - s.x0;
        let t = ((xi - s.x0) / h).clamp(0.0, 1.0);
        let (v, _) = quintic(t, h, s.v0, s.w0, s.dw0, s.v1, s.w1, s.dw1);
        let (w, _) = quintic(t, h, s.w0, s.dw0, s.ddw0, s.w1, s.dw1, s.ddw1);
        (v, w)
    }

    pub fn eval_v(&self, xi: f64) -> f64 {
        self.eval_v_and_slope(xi).0
    }

    /// Density profile from the first-integral closed form, positive for
    /// a > 0 by construction.
    pub fn eval_u(&self, xi: f64) -> f64 {
        if self.a == 0.0 {
            return 0.0;
        }
        self.a * (self.eval_v(xi) - xi * xi / 4.0).exp()
    }

    /// The scaling-form density t^{-1} U(|x| / sqrt t) sampled on a grid.
    /// The box corner must stay inside the integrated radial range.
    pub fn rescaled_density(&self, grid: Grid2D, t: f64) -> Result<SpectralField> {
        if !(t > 0.0) {
            return Err(KsError::InvalidArgument(format!(
                "scaling time t = {t} must be positive"
            )));
        }
        let needed = grid.l() / std::f64::consts::SQRT_2 / t.sqrt();
        if needed > self.xi_max {
            return Err(KsError::RangeTooShort {
                needed,
                available: self.xi_max,
            });
        }
        let n = grid.n();
        let values = Array2::from_shape_fn((n, n), |(iy, ix)| {
            let x = grid.coord(ix);
            let y = grid.coord(iy);
            self.eval_u(x.hypot(y) / t.sqrt()) / t
        });
        SpectralField::from_values(grid, values)
    }

    /// Uniform (xi, U, V) table for export.
    pub fn sample_table(&self, points: usize) -> Vec<(f64, f64, f64)> {
        (0..points.max(2))
            .map(|i| {
                let xi = self.xi_max * i as f64 / (points.max(2) - 1) as f64;
                (xi, self.eval_u(xi), self.eval_v(xi))
            })
            .collect()
    }
}

/// Right-hand side of the first-order system y = (V, W, U_dup, m) where
/// U_dup redundantly transports the closed form and m accumulates mass.
fn rhs(xi: f64, y: [f64; 4], a: f64, tau: f64) -> [f64; 4] {
    let u = a * (y[0] - xi * xi / 4.0).exp();
    let friction = 1.0 / xi + tau * xi / 2.0;
    [
        y[1],
        -friction * y[1] - u,
        y[2] * (y[1] - xi / 2.0),
        2.0 * std::f64::consts::PI * xi * u,
    ]
}

/// W'' from differentiating the ODE once (for dense output of W).
fn w_second(xi: f64, v: f64, w: f64, dw: f64, a: f64, tau: f64) -> f64 {
    let u = a * (v - xi * xi / 4.0).exp();
    let friction = 1.0 / xi + tau * xi / 2.0;
    (1.0 / (xi * xi) - tau / 2.0) * w - friction * dw - u * (w - xi / 2.0)
}

const DP_C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates one profile by adaptive fifth-order stepping from the origin
/// series to xi_max, recording dense output, then validates the trajectory
/// and corrects the mass for the Gaussian tail.
pub fn integrate_profile(a: f64, tau: f64, settings: &OdeSettings) -> Result<RadialProfile> {
    settings.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(KsError::InvalidArgument(format!(
            "relaxation time tau = {tau} must be positive"
        )));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(KsError::InvalidArgument(format!(
            "shooting parameter a = {a} must be nonnegative"
        )));
    }
    if a == 0.0 {
        return RadialProfile::zero(tau, settings);
    }

    let mut profile = RadialProfile::zero(tau, settings)?;
    profile.a = a;

    // series handoff; the truncation error of the quartic series scales like
    // a^3 xi^6, so large shooting parameters start earlier to hold it near
    // the absolute tolerance (0.03/sqrt(a) keeps a^3 xi^6 ~ 1e-9)
    let x0 = settings.xi_start.min(0.03 / a.sqrt());
    profile.xi_start = x0;
    let (v0, w0) = profile.series_v(x0);
    let u0 = a * (v0 - x0 * x0 / 4.0).exp();
    let m0 = std::f64::consts::PI * a * x0 * x0 * (1.0 + (-a / 4.0 - 0.25) * x0 * x0 / 2.0);
    let mut x = x0;
    let mut y = [v0, w0, u0, m0];
    let mut f = rhs(x, y, a, tau);
    let mut h = (settings.rel_tol.powf(0.2) * 0.1).min(0.01).min(settings.max_step);
    let mut steps = Vec::new();
    let mut k = [[0.0f64; 4]; 7];
    let mut dual_gap: f64 = 0.0;

    while x < settings.xi_max {
        if h < 1e-13 * settings.xi_max {
            return Err(KsError::OdeFailure {
                xi: x,
                reason: format!("step size underflow (h = {h:.3e})"),
            });
        }
        if x + h > settings.xi_max {
            h = settings.xi_max - x;
        }
        k[0] = f;
        for stage in 0..6 {
            let mut ys = y;
            for (j, yj) in ys.iter_mut().enumerate() {
                for (s, ks) in k.iter().enumerate().take(stage + 1) {
                    *yj += h * DP_A[stage][s] * ks[j];
                }
                let _ = j;
            }
            k[stage + 1] = rhs(x + DP_C[stage] * h, ys, a, tau);
        }
        // 5th order solution is stage 6's argument (FSAL)
        let mut y1 = y;
        for (j, yj) in y1.iter_mut().enumerate() {
            for (s, ks) in k.iter().enumerate().take(6) {
                *yj += h * DP_A[5][s] * ks[j];
            }
            let _ = j;
        }
        let f1 = k[6];
        let mut err: f64 = 0.0;
        for j in 0..4 {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += DP_E[s] * ks[j];
            }
            e *= h;
            let scale = settings.abs_tol + settings.rel_tol * y[j].abs().max(y1[j].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            return Err(KsError::OdeFailure {
                xi: x,
                reason: "non-finite error estimate".into(),
            });
        }
        if err <= 1.0 {
            let x1 = x + h;
            steps.push(StepRecord {
                x0: x,
                x1,
                v0: y[0],
                v1: y1[0],
                w0: y[1],
                w1: y1[1],
                dw0: f[1],
                dw1: f1[1],
                ddw0: w_second(x, y[0], y[1], f[1], a, tau),
                ddw1: w_second(x1, y1[0], y1[1], f1[1], a, tau),
            });
            // cross-check the redundant U transport while it is still
            // resolved above the absolute-tolerance floor
            let u_cf = a * (y1[0] - x1 * x1 / 4.0).exp();
            if u_cf >= 1e-6 * a {
                dual_gap = dual_gap.max((y1[2] - u_cf).abs() / u_cf);
            }
            x = x1;
            y = y1;
            f = f1;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).min(settings.max_step);
    }

    profile.steps = steps;
    profile.v_infinity = y[0];
    // analytic Gaussian tail beyond xi_max
    let tail = 4.0 * std::f64::consts::PI
        * a
        * (y[0] - settings.xi_max * settings.xi_max / 4.0).exp();
    profile.mass = y[3] + tail;
    profile.dual_route_gap = dual_gap;
    validate_profile(&mut profile)?;
    Ok(profile)
}

/// Resamples the dense output against the ODE and the first integral;
/// fills the residual fields.
fn validate_profile(profile: &mut RadialProfile) -> Result<()> {
    let a = profile.a;
    let tau = profile.tau;
    let mut worst_sys: f64 = 0.0;
    let mut worst_fi: f64 = 0.0;
    for s in &profile.steps {
        let h = s.x1 - s.x0;
        for &frac in &[0.21, 0.5, 0.79] {
            let xi = s.x0 + frac * h;
            let (v, dv) = quintic(frac, h, s.v0, s.w0, s.dw0, s.v1, s.w1, s.dw1);
            let (w, dw) = quintic(frac, h, s.w0, s.dw0, s.ddw0, s.w1, s.dw1, s.ddw1);
            let u = a * (v - xi * xi / 4.0).exp();
            let friction = 1.0 / xi + tau * xi / 2.0;
            // system defect: (V' - W, W' + friction W + U), scaled
            let r1 = (dv - w).abs() / (1.0 + w.abs());
            let r2 = (dw + friction * w + u).abs()
                / (a + dw.abs() + (friction * w).abs() + u);
            worst_sys = worst_sys.max(r1).max(r2);
            // first integral: xi U' - xi U V' + (xi^2/2) U with
            // U' = U (dV_interp - xi/2); collapses to xi U (dV - W)
            let fi = (xi * u * (dv - w)).abs() / (a + xi * u * (1.0 + w.abs()));
            worst_fi = worst_fi.max(fi);
        }
    }
    profile.residual_max = worst_sys;
    profile.first_integral_residual = worst_fi;
    if !profile.mass.is_finite() || !profile.v_infinity.is_finite() {
        return Err(KsError::NotFinite("profile mass or far-field value".into()));
    }
    Ok(())
}

/// One point of a mass sweep; failures are recorded, not fatal.
#[derive(Debug, Clone)]
pub struct MassSample {
    pub a: f64,
    pub mass: f64,
    pub v_infinity: f64,
    pub residual_max: f64,
    pub error: Option<String>,
}

/// An equal-mass pair (a1 < a2) found on the curve.
#[derive(Debug, Clone, Copy)]
pub struct MassPair {
    pub a1: f64,
    pub a2: f64,
    pub mass: f64,
}

/// The swept mass landscape M(a, tau) at fixed tau.
#[derive(Debug, Clone)]
pub struct MassCurve {
    pub tau: f64,
    pub samples: Vec<MassSample>,
    /// Largest mass over the sweep.
    pub m_tau: f64,
    /// Distinct-parameter pairs with equal mass (within the pairing
    /// tolerance), present only when the curve is non-monotone.
    pub pairs: Vec<MassPair>,
}

/// Relative tolerance used to declare two masses equal when pairing.
pub const PAIRING_TOL: f64 = 1e-3;

/// Absolute mass drop that counts as a real dip in the curve. The peak
/// emerges from a = infinity with a vanishing excess over 8 pi as tau
/// approaches the transition, so the detector must work in absolute mass
/// units; 1e-3 sits four orders above the quadrature error of the sweep.
pub const NON_MONOTONE_TOL: f64 = 1e-3;

impl MassCurve {
    /// True when the curve drops by more than [`NON_MONOTONE_TOL`] after
    /// its running maximum: the signature of the non-uniqueness regime.
    pub fn non_monotone(&self) -> bool {
        let mut running: f64 = 0.0;
        let mut worst_drop: f64 = 0.0;
        for s in self.samples.iter().filter(|s| s.error.is_none()) {
            running = running.max(s.mass);
            worst_drop = worst_drop.max(running - s.mass);
        }
        worst_drop > NON_MONOTONE_TOL
    }
}

/// Default shooting sweep: 200 logarithmic points across six decades.
pub fn default_a_grid() -> Vec<f64> {
    let n = 200;
    (0..n)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Sweeps the shooting parameter, assembling the mass curve and bisecting
/// for equal-mass pairs between the ascending branch and every sufficiently
/// deep point of the descending branch.
pub fn mass_curve(tau: f64, a_grid: &[f64], settings: &OdeSettings) -> Result<MassCurve> {
    if a_grid.is_empty() || a_grid.windows(2).any(|w| w[0] >= w[1]) || a_grid[0] <= 0.0 {
        return Err(KsError::InvalidArgument(
            "shooting grid must be positive and strictly increasing".into(),
        ));
    }
    let samples: Vec<MassSample> = a_grid
        .par_iter()
        .map(|&a| match integrate_profile(a, tau, settings) {
            Ok(p) => MassSample {
                a,
                mass: p.mass(),
                v_infinity: p.v_infinity(),
                residual_max: p.residual_max(),
                error: None,
            },
            Err(e) => MassSample {
                a,
                mass: f64::NAN,
                v_infinity: f64::NAN,
                residual_max: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let ok: Vec<&MassSample> = samples.iter().filter(|s| s.error.is_none()).collect();
    if ok.is_empty() {
        return Err(KsError::InvalidArgument(format!(
            "every profile integration failed across the sweep at tau = {tau}"
        )));
    }
    let (peak_idx, m_tau) = ok
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bm), (i, s)| {
            if s.mass > bm {
                (i, s.mass)
            } else {
                (bi, bm)
            }
        });

    let mut pairs = Vec::new();
    // descending branch: sample a handful of targets below the peak and
    // bisect their ascending-branch partners
    let descending: Vec<&&MassSample> = ok[peak_idx + 1..]
        .iter()
        .filter(|s| s.mass < (1.0 - 2.0 * PAIRING_TOL) * m_tau)
        .collect();
    for d in descending.iter().step_by(descending.len().div_ceil(8).max(1)) {
        let target = d.mass;
        // bracket on the ascending branch
        let asc = &ok[..=peak_idx];
        let Some(hi_idx) = asc.iter().position(|s| s.mass >= target) else {
            continue;
        };
        if hi_idx == 0 {
            continue;
        }
        let (mut lo, mut hi) = (asc[hi_idx - 1].a, asc[hi_idx].a);
        let mut matched = None;
        for _ in 0..60 {
            let mid = (lo * hi).sqrt();
            let m = match integrate_profile(mid, tau, settings) {
                Ok(p) => p.mass(),
                Err(_) => break,
            };
            if (m - target).abs() <= PAIRING_TOL * target {
                matched = Some(mid);
                break;
            }
            if m < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if let Some(a1) = matched {
            pairs.push(MassPair {
                a1,
                a2: d.a,
                mass: target,
            });
        }
    }

    Ok(MassCurve {
        tau,
        samples,
        m_tau,
        pairs,
    })
}

/// Locates the relaxation time where the mass curve stops being monotone,
/// by bisection on the non-monotonicity predicate over the default sweep.
pub fn find_tau_star(tau_lo: f64, tau_hi: f64, settings: &OdeSettings) -> Result<f64> {
    if !(tau_lo > 0.0 && tau_lo < tau_hi) {
        return Err(KsError::InvalidArgument(format!(
            "need 0 < tau_lo < tau_hi, got ({tau_lo}, {tau_hi})"
        )));
    }
    // near the transition the peak sits far out in a, so the search sweep
    // extends three decades past the default grid
    let grid: Vec<f64> = {
        let n = 300;
        (0..n)
            .map(|i| 10f64.powf(-3.0 + 9.0 * i as f64 / (n - 1) as f64))
            .collect()
    };
    let at = |tau: f64| -> Result<bool> { Ok(mass_curve(tau, &grid, settings)?.non_monotone()) };
    let (p_lo, p_hi) = (at(tau_lo)?, at(tau_hi)?);
    if p_lo || !p_hi {
        return Err(KsError::NotMonotone(format!(
            "bracket does not straddle the transition: non-monotone(tau = {tau_lo}) = {p_lo}, \
             non-monotone(tau = {tau_hi}) = {p_hi}"
        )));
    }
    let (mut lo, mut hi) = (tau_lo, tau_hi);
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One point of the maximal-mass growth trend.
#[derive(Debug, Clone, Copy)]
pub struct TrendPoint {
    pub tau: f64,
    pub m_tau: f64,
    /// Plug-in lower bound (4 pi / e)(tau - 1)/log tau, zero for tau <= 1.
    pub lower_bound: f64,
}

/// Maximal mass per relaxation time; errors unless the trend is strictly
/// increasing along the list.
pub fn m_tau_trend(tau_list: &[f64], settings: &OdeSettings) -> Result<Vec<TrendPoint>> {
    if tau_list.len() < 2 || tau_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KsError::InvalidArgument(
            "need at least two strictly increasing relaxation times".into(),
        ));
    }
    let grid = default_a_grid();
    let mut out = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let curve = mass_curve(tau, &grid, settings)?;
        let lower_bound = if tau > 1.0 {
            4.0 * std::f64::consts::PI / std::f64::consts::E * (tau - 1.0) / tau.ln()
        } else {
            0.0
        };
        out.push(TrendPoint {
            tau,
            m_tau: curve.m_tau,
            lower_bound,
        });
    }
    for w in out.windows(2) {
        if w[1].m_tau <= w[0].m_tau {
            return Err(KsError::NotMonotone(format!(
                "maximal mass fell from {} at tau = {} to {} at tau = {}",
                w[0].m_tau, w[0].tau, w[1].m_tau, w[1].tau
            )));
        }
    }
    Ok(out)
}

/// Embeds a profile as full 2D initial data at t = 1: u = U(|x|),
/// v = V(|x|) - V_infinity (shifted so v decays at the box boundary, which
/// is legitimate since gamma = 0 dynamics ignore constant shifts of v).
pub fn profile_to_initial_state(
    profile: &RadialProfile,
    grid: Grid2D,
) -> Result<crate::evolution::EvolutionState> {
    let u = profile.rescaled_density(grid, 1.0)?;
    let n = grid.n();
    let vref = profile.v_infinity();
    let values = Array2::from_shape_fn((n, n), |(iy, ix)| {
        let x = grid.coord(ix);
        let y = grid.coord(iy);
        profile.eval_v(x.hypot(y)) - vref
    });
    let v = SpectralField::from_values(grid, values)?;
    let params = crate::params::Params::new(profile.tau(), 0.0)?;
    crate::evolution::EvolutionState::new(u, v, 1.0, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn small_a_mass_approaches_linearized_value() {
        let settings = OdeSettings::default();
        let p = integrate_profile(0.01, 1.0, &settings).unwrap();
        assert_relative_eq!(p.mass(), 4.0 * PI * 0.01, max_relative = 0.02);
        // linearized profile: U ~ a e^{-xi^2/4}
        for xi in [0.5, 1.0, 2.0] {
            assert_relative_eq!(
                p.eval_u(xi),
                0.01 * (-xi * xi / 4.0).exp(),
                max_relative = 0.02
            );
        }
    }

    #[test]
    fn zero_shooting_parameter_is_exact() {
        let p = integrate_profile(0.0, 3.0, &OdeSettings::default()).unwrap();
        assert_eq!(p.mass(), 0.0);
        assert_eq!(p.eval_u(1.0), 0.0);
        assert_eq!(p.eval_v(1.0), 0.0);
        assert_eq!(p.residual_max(), 0.0);
    }

    #[test]
    fn residuals_are_tiny_and_v_monotone() {
        let settings = OdeSettings::default();
        for (a, tau) in [(0.5, 1.0), (3.0, 10.0), (20.0, 100.0)] {
            let p = integrate_profile(a, tau, &settings).unwrap();
            assert!(p.residual_max() < 1e-8, "a={a} tau={tau}: {}", p.residual_max());
            assert!(
                p.first_integral_residual() < 1e-8,
                "a={a} tau={tau}: {}",
                p.first_integral_residual()
            );
            assert!(p.dual_route_gap() < 1e-6, "a={a}: {}", p.dual_route_gap());
            // V nonincreasing, closed-form positivity
            let mut prev = 0.0;
            for i in 1..=100 {
                let xi = settings.xi_max * i as f64 / 100.0;
                let v = p.eval_v(xi);
                assert!(v <= prev + 1e-12, "V rose at xi = {xi}");
                assert!(p.eval_u(xi) > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn closed_form_holds_pointwise() {
        let p = integrate_profile(2.0, 5.0, &OdeSettings::default()).unwrap();
        for i in 1..200 {
            let xi = 20.0 * i as f64 / 200.0;
            let lhs = p.eval_u(xi);
            let rhs = p.a() * (p.eval_v(xi) - xi * xi / 4.0).exp();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn mass_is_quadrature_converged() {
        let coarse = OdeSettings {
            max_step: 0.05,
            ..OdeSettings::default()
        };
        let fine = OdeSettings {
            max_step: 0.025,
            ..OdeSettings::default()
        };
        let m1 = integrate_profile(1.5, 2.0, &coarse).unwrap().mass();
        let m2 = integrate_profile(1.5, 2.0, &fine).unwrap().mass();
        assert!((m1 - m2).abs() / m2 < 1e-6, "{m1} vs {m2}");
    }

    #[test]
    fn low_tau_sweep_respects_critical_mass() {
        let grid: Vec<f64> = (0..60)
            .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 59.0))
            .collect();
        let curve = mass_curve(0.5, &grid, &OdeSettings::default()).unwrap();
        assert!(curve.m_tau <= 8.0 * PI + 0.1, "m_tau = {}", curve.m_tau);
        assert!(!curve.non_monotone());
        assert!(curve.pairs.is_empty());
    }

    #[test]
    fn high_tau_curve_exceeds_critical_mass_with_pairs() {
        let grid: Vec<f64> = (0..80)
            .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 79.0))
            .collect();
        let curve = mass_curve(10.0, &grid, &OdeSettings::default()).unwrap();
        assert!(curve.m_tau > 8.0 * PI, "m_tau = {}", curve.m_tau);
        assert!(curve.non_monotone());
        assert!(!curve.pairs.is_empty());
        for pair in &curve.pairs {
            assert!(pair.a1 < pair.a2);
            let p1 = integrate_profile(pair.a1, 10.0, &OdeSettings::default()).unwrap();
            assert_relative_eq!(p1.mass(), pair.mass, max_relative = 2.0 * PAIRING_TOL);
        }
    }

    #[test]
    fn trend_errors_on_decreasing_input_expectation() {
        // a reversed list violates the precondition
        assert!(m_tau_trend(&[10.0, 2.0], &OdeSettings::default()).is_err());
    }

    #[test]
    fn embedding_requires_enough_radial_range() {
        let p = integrate_profile(1.0, 10.0, &OdeSettings::default()).unwrap();
        let big = Grid2D::new(64, 40.0).unwrap();
        match profile_to_initial_state(&p, big) {
            Err(KsError::RangeTooShort { needed, available }) => {
                assert!(needed > available);
            }
            other => panic!("expected range error, got {other:?}"),
        }
        let ok_grid = Grid2D::new(64, 20.0).unwrap();
        let state = profile_to_initial_state(&p, ok_grid).unwrap();
        assert_relative_eq!(state.t, 1.0);
        // v decays toward the box edge after the far-field shift
        let edge = state.v.values()[[0, 0]];
        assert!(edge.abs() < 1e-6, "edge v = {edge}");
    }

    #[test]
    fn rescaled_density_matches_pointwise_eval() {
        let p = integrate_profile(0.8, 5.0, &OdeSettings::default()).unwrap();
        let grid = Grid2D::new(32, 16.0).unwrap();
        let f = p.rescaled_density(grid, 2.0).unwrap();
        let x = grid.coord(20);
        let y = grid.coord(9);
        let expect = p.eval_u(x.hypot(y) / 2.0f64.sqrt()) / 2.0;
        assert_relative_eq!(f.values()[[9, 20]], expect, max_relative = 1e-12);
    }
}
