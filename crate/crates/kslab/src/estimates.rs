//! Quantitative estimates behind the small-data fixed point.
//!
//! The contraction argument runs in the weighted space with norm
//! |||u||| = sup_t t^{1-1/p} |u(t)|_p and hinges on three ingredients:
//!
//! * heat smoothing of measures, |e^{t lap} mu|_p <= C_p t^{-(1-1/p)} |mu|,
//!   with sharp constant C_p = (4 pi)^{1/p - 1} p^{-1/p};
//! * a Beta-function identity that resolves the twice-singular time
//!   convolution int_0^t (t-s)^{-1/2-1/q} s^{1/q+1/p-3/2} ds exactly;
//! * the bilinear bound |||B(u, z)||| <= eta(tau) |||u||| |||z||| whose
//!   constant decays in the relaxation time like tau^{1/p - 1/q - 1/2}.
//!
//! The exponent pair (p, q) must sit in a joint admissibility window for
//! all three to hold at once; [`ExponentSet`] guards it. [`eta_empirical`]
//! measures eta(tau) from below by scanning probe families through the
//! discrete bilinear form, giving both a decay-rate check and a calibrated
//! prefactor for [`crate::mild::suggest_tau`].

use crate::error::{KsError, Result};
use crate::field::lp_norm;
use crate::grid::Grid2D;
use crate::measure::{realize_measure, MollifiedMeasure};
use crate::mild::{self, SlabStart, TimeGrid, TimeSlab};
use crate::params::Params;
use statrs::function::gamma::ln_gamma;

/// Integrability exponents (p, q) in the joint admissibility window
/// 4/3 < p < 2 and p' < q < 2p/(2-p), with p' the conjugate of p.
///
/// The window is exactly what makes the heat smoothing, the product
/// estimate and the time convolution integrable simultaneously; its
/// endpoints are excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentSet {
    p: f64,
    q: f64,
}

impl ExponentSet {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) {
            return Err(KsError::InvalidArgument(format!(
                "exponents must be finite, got p = {p}, q = {q}"
            )));
        }
        if !(p > 4.0 / 3.0 && p < 2.0) {
            return Err(KsError::InvalidArgument(format!(
                "p = {p} outside the open window (4/3, 2)"
            )));
        }
        let (lo, hi) = admissible_window(p)?;
        if !(q > lo && q < hi) {
            return Err(KsError::InvalidArgument(format!(
                "q = {q} outside the open window ({lo}, {hi}) for p = {p}"
            )));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Product exponent from 1/r = 1/p + 1/q.
    pub fn r(&self) -> f64 {
        1.0 / (1.0 / self.p + 1.0 / self.q)
    }

    /// Decay rate of eta(tau): sigma = 1/p - 1/q - 1/2, negative on the
    /// admissible window.
    pub fn decay_exponent(&self) -> f64 {
        1.0 / self.p - 1.0 / self.q - 0.5
    }
}

/// Open interval of companion exponents q admissible for a given p.
pub fn admissible_window(p: f64) -> Result<(f64, f64)> {
    if !(p > 4.0 / 3.0 && p < 2.0) {
        return Err(KsError::InvalidArgument(format!(
            "p = {p} outside the open window (4/3, 2)"
        )));
    }
    Ok((p / (p - 1.0), 2.0 * p / (2.0 - p)))
}

/// Exact value of the singular time convolution constant,
/// B(1/2 - 1/q, 1/p + 1/q - 1/2), through log-gamma.
pub fn beta_constant(exponents: &ExponentSet) -> f64 {
    let a = 0.5 - 1.0 / exponents.q;
    let b = 1.0 / exponents.p + 1.0 / exponents.q - 0.5;
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Weighted supremum norm of a slab; see [`TimeSlab::triple_norm`].
pub fn triple_norm(slab: &TimeSlab, p: f64) -> Result<f64> {
    slab.triple_norm(p)
}

/// One measurement of the heat smoothing bound for measures.
#[derive(Debug, Clone, Copy)]
pub struct LinearEstimateSample {
    pub p: f64,
    pub t: f64,
    /// t^{1-1/p} |e^{t lap} u0|_p / |u0|, the effective constant.
    pub measured: f64,
    /// The sharp constant (4 pi)^{1/p-1} p^{-1/p}, attained by atoms.
    pub bound: f64,
}

/// Sharp constant of |e^{t lap} mu|_p <= C t^{-(1-1/p)} |mu|.
pub fn smoothing_constant(p: f64) -> f64 {
    if p.is_infinite() {
        return 1.0 / (4.0 * std::f64::consts::PI);
    }
    (4.0 * std::f64::consts::PI).powf(1.0 / p - 1.0) * p.powf(-1.0 / p)
}

/// Measures the heat smoothing constant of a concrete measure across
/// exponents and times. Every sample must satisfy measured <= bound up to
/// mollification and grid error; callers asserting sharpness should use
/// point-like data, for which the ratio tends to 1.
pub fn verify_linear_estimates(
    u0: &MollifiedMeasure,
    grid: Grid2D,
    p_list: &[f64],
    t_list: &[f64],
) -> Result<Vec<LinearEstimateSample>> {
    let tv: f64 = u0.atoms().iter().map(|a| a.mass.abs()).sum::<f64>()
        + u0
            .background()
            .map(|b| lp_norm(b, 1.0))
            .transpose()?
            .unwrap_or(0.0);
    if tv == 0.0 {
        return Err(KsError::InvalidArgument(
            "cannot normalize by a measure of zero total variation".into(),
        ));
    }
    let realized = realize_measure(u0, grid)?;
    let mut out = Vec::with_capacity(p_list.len() * t_list.len());
    for &t in t_list {
        let evolved = crate::field::heat_propagate(&realized, t)?;
        for &p in p_list {
            let measured = t.powf(1.0 - 1.0 / p) * lp_norm(&evolved, p)? / tv;
            out.push(LinearEstimateSample {
                p,
                t,
                measured,
                bound: smoothing_constant(p),
            });
        }
    }
    Ok(out)
}

/// Probe family settings for the empirical eta scan.
///
/// Probes are unit-mass self-similar heat slabs G(x, w t) whose dilation w
/// ranges over `dilations`; sharp pairs have w comparable to 1/tau, so the
/// family should span down to roughly 1/(3 tau_max) to avoid starving the
/// large-tau end of the scan.
#[derive(Debug, Clone)]
pub struct EtaProbeSettings {
    pub grid: Grid2D,
    pub tgrid: TimeGrid,
    pub dilations: Vec<f64>,
    pub gamma: f64,
}

impl EtaProbeSettings {
    /// Small settings for interactive use: coarse grid, short horizon,
    /// three dilation octaves. Adequate for order-of-magnitude calibration.
    pub fn desk() -> Result<Self> {
        Ok(Self {
            grid: Grid2D::new(64, 20.0)?,
            tgrid: TimeGrid::new(1.0, 16, 2.0)?,
            dilations: vec![1.0 / 128.0, 1.0 / 16.0, 0.5, 2.0],
            gamma: 0.0,
        })
    }
}

/// One point of the eta scan, with the probe pair that attained it.
#[derive(Debug, Clone, Copy)]
pub struct EtaSample {
    pub tau: f64,
    pub eta: f64,
    /// Dilation of the partner slab u in the winning pair.
    pub w_u: f64,
    /// Dilation of the drift-generating slab z; sharp pairs sit near 1/tau.
    pub w_z: f64,
}

/// Empirical model of the bilinear constant eta(tau).
#[derive(Debug, Clone)]
pub struct EtaModel {
    /// Envelope prefactor: max over samples of eta / tau^{decay_exponent}.
    pub c_fit: f64,
    /// The predicted decay rate 1/p - 1/q - 1/2.
    pub decay_exponent: f64,
    /// Least-squares slope of ln eta against ln tau.
    pub fitted_slope: f64,
    /// Standard error of the fitted slope.
    pub slope_stderr: f64,
    pub samples: Vec<EtaSample>,
}

impl EtaModel {
    /// Model value c_fit tau^{decay_exponent}.
    pub fn eval(&self, tau: f64) -> f64 {
        self.c_fit * tau.powf(self.decay_exponent)
    }
}

/// Measures eta(tau) = sup |||B(u, z)||| / (|||u||| |||z|||) from below by
/// scanning all ordered pairs of probe slabs, for each relaxation time in
/// `taus`. Probes under-resolved by the grid only lower the ratio, so the
/// scan is a genuine lower envelope of the continuum constant.
pub fn eta_empirical(
    exponents: &ExponentSet,
    taus: &[f64],
    settings: &EtaProbeSettings,
) -> Result<EtaModel> {
    if taus.len() < 2 {
        return Err(KsError::InvalidArgument(
            "eta scan needs at least two relaxation times".into(),
        ));
    }
    if settings.dilations.is_empty() {
        return Err(KsError::InvalidArgument(
            "eta scan needs at least one probe dilation".into(),
        ));
    }
    let p = exponents.p;
    let grid = settings.grid;
    let tgrid = settings.tgrid;

    let probes: Vec<TimeSlab> = settings
        .dilations
        .iter()
        .map(|&w| {
            if !(w > 0.0 && w.is_finite()) {
                return Err(KsError::InvalidArgument(format!(
                    "probe dilation {w} must be positive"
                )));
            }
            TimeSlab::sample(grid, tgrid, SlabStart::Singular, |t| {
                crate::field::gauss_kernel(grid, 1.0, (0.0, 0.0), w * t)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = probes
        .iter()
        .map(|s| s.triple_norm(p))
        .collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::with_capacity(taus.len());
    for &tau in taus {
        let params = Params::new(tau, settings.gamma)?;
        let mut best = 0.0f64;
        let mut best_pair = (settings.dilations[0], settings.dilations[0]);
        for (zi, z) in probes.iter().enumerate() {
            let pots = mild::l_potentials_at_midpoints(z, &params);
            for (ui, u) in probes.iter().enumerate() {
                let b = mild::bilinear_slab_from_potentials(u, &pots)?;
                let ratio = b.triple_norm(p)? / (norms[ui] * norms[zi]);
                if ratio > best {
                    best = ratio;
                    best_pair = (settings.dilations[ui], settings.dilations[zi]);
                }
            }
        }
        if !(best > 0.0 && best.is_finite()) {
            return Err(KsError::NotFinite(format!(
                "eta scan degenerated at tau = {tau}"
            )));
        }
        samples.push(EtaSample { tau, eta: best, w_u: best_pair.0, w_z: best_pair.1 });
    }

    let decay_exponent = exponents.decay_exponent();
    let c_fit = samples
        .iter()
        .map(|s| s.eta / s.tau.powf(decay_exponent))
        .fold(0.0f64, f64::max);
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.tau.ln(), s.eta.ln())).collect();
    let (fitted_slope, slope_stderr) = slope_with_stderr(&pts);
    Ok(EtaModel {
        c_fit,
        decay_exponent,
        fitted_slope,
        slope_stderr,
        samples,
    })
}

/// Desk-sized scan used when a contraction failure needs a quick model.
pub(crate) fn eta_empirical_desk(exponents: &ExponentSet) -> Result<EtaModel> {
    eta_empirical(exponents, &[1.0, 10.0, 100.0], &EtaProbeSettings::desk()?)
}

pub(crate) fn slope_with_stderr(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if pts.len() <= 2 {
        return (slope, f64::NAN);
    }
    let intercept = my - slope * mx;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    (slope, stderr)
}

/// Smooth compactly supported test functions for weak-convergence probes.
#[derive(Debug, Clone, Copy)]
pub enum TestFunction {
    /// exp(1 - 1/(1 - r^2/R^2)) inside the disk of radius R about `center`,
    /// zero outside; peak value 1 at the center.
    Bump { center: (f64, f64), radius: f64 },
    /// Identically 1 on r < radius, smoothly decaying to 0 across the
    /// annulus radius < r < radius + margin, centered at the origin.
    Plateau { radius: f64, margin: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            TestFunction::Bump {
                center: (cx, cy),
                radius,
            } => {
                let r2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (radius * radius);
                if r2 >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
            TestFunction::Plateau { radius, margin } => {
                let r = x.hypot(y);
                if r <= radius {
                    1.0
                } else if r >= radius + margin {
                    0.0
                } else {
                    // smooth partition step built from s -> e^{-1/s}
                    let s = (radius + margin - r) / margin;
                    let f = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
                    f(s) / (f(s) + f(1.0 - s))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TestFunction::Bump {
                center: (cx, cy),
                radius,
            } => format!("bump(r={radius};at={cx},{cy})"),
            TestFunction::Plateau { radius, margin } => {
                format!("plateau(r={radius};m={margin})")
            }
        }
    }

    /// Distance from the origin beyond which the function vanishes.
    fn outer_reach(&self) -> f64 {
        match *self {
            TestFunction::Bump {
                center: (cx, cy),
                radius,
            } => cx.hypot(cy) + radius,
            TestFunction::Plateau { radius, margin } => radius + margin,
        }
    }

    fn check_supported(&self, grid: Grid2D) -> Result<()> {
        if self.outer_reach() >= 0.5 * grid.l() {
            return Err(KsError::InvalidArgument(format!(
                "test function {} touches the box boundary (reach {:.3} vs half side {:.3})",
                self.name(),
                self.outer_reach(),
                0.5 * grid.l()
            )));
        }
        Ok(())
    }

    /// Pointwise grid samples of the test function.
    pub fn sample(&self, grid: Grid2D) -> ndarray::Array2<f64> {
        let n = grid.n();
        ndarray::Array2::from_shape_fn((n, n), |(iy, ix)| {
            self.eval(grid.coord(ix), grid.coord(iy))
        })
    }
}

/// One weak-pairing defect sample: |<u(t), phi> - <u0, phi>|.
#[derive(Debug, Clone)]
pub struct AttainmentSample {
    pub t: f64,
    pub testfn: String,
    pub defect: f64,
}

/// Pairs every node of a slab against test functions and reports the defect
/// from the initial measure, whose atoms pair exactly as point evaluations.
/// Weak-star attainment of the data shows up as defects vanishing with t.
pub fn weak_attainment_probe(
    slab: &TimeSlab,
    u0: &MollifiedMeasure,
    test_functions: &[TestFunction],
) -> Result<Vec<AttainmentSample>> {
    let grid = slab.spatial();
    let h2 = grid.spacing() * grid.spacing();
    let mut out = Vec::with_capacity(test_functions.len() * slab.tgrid().len());
    for tf in test_functions {
        tf.check_supported(grid)?;
        let phi = tf.sample(grid);
        let mut target: f64 = u0
            .atoms()
            .iter()
            .map(|a| a.mass * tf.eval(a.x, a.y))
            .sum();
        if let Some(bg) = u0.background() {
            if bg.grid() != grid {
                return Err(KsError::GridMismatch {
                    expected: grid,
                    found: bg.grid(),
                });
            }
            target += bg
                .values()
                .iter()
                .zip(phi.iter())
                .map(|(u, p)| u * p)
                .sum::<f64>()
                * h2;
        }
        for j in 1..=slab.tgrid().len() {
            let f = slab.field(j)?;
            let pairing: f64 = f
                .values()
                .iter()
                .zip(phi.iter())
                .map(|(u, p)| u * p)
                .sum::<f64>()
                * h2;
            out.push(AttainmentSample {
                t: slab.tgrid().node(j),
                testfn: tf.name(),
                defect: (pairing - target).abs(),
            });
        }
    }
    Ok(out)
}

/// The scalar shadow of the fixed-point argument: y = y0 + eta y^2.
///
/// Its Picard iteration from 0 mirrors the function-space one; the
/// discriminant condition 4 eta y0 < 1 decides existence, and the smaller
/// root is the one the iteration finds.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticToy {
    pub y0: f64,
    pub eta: f64,
}

impl QuadraticToy {
    pub fn new(y0: f64, eta: f64) -> Result<Self> {
        if !(y0 >= 0.0 && y0.is_finite() && eta > 0.0 && eta.is_finite()) {
            return Err(KsError::InvalidArgument(format!(
                "quadratic toy needs y0 >= 0 and eta > 0, got y0 = {y0}, eta = {eta}"
            )));
        }
        Ok(Self { y0, eta })
    }

    /// Both roots (small, large) when 4 eta y0 < 1, in increasing order.
    pub fn roots(&self) -> Option<(f64, f64)> {
        let disc = 1.0 - 4.0 * self.eta * self.y0;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        Some(((1.0 - s) / (2.0 * self.eta), (1.0 + s) / (2.0 * self.eta)))
    }

    /// Trace of u <- y0 + eta u^2 from u = 0, `n` steps.
    pub fn iterate(&self, n: usize) -> Vec<f64> {
        self.iterate_from(0.0, n)
    }

    /// Trace of the same map from an arbitrary start; above the large root
    /// the iterates run away monotonically.
    pub fn iterate_from(&self, start: f64, n: usize) -> Vec<f64> {
        let mut u = start;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            u = self.y0 + self.eta * u * u;
            out.push(u);
            if !u.is_finite() {
                break;
            }
        }
        out
    }
}
