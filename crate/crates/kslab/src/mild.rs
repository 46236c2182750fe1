//! Mild (Duhamel) formulation of the system on a graded time grid.
//!
//! A mild solution solves the fixed-point equation
//!
//! ```text
//! u(t) = e^{t lap} u0 + B(u, u)(t)
//! B(u, z)(t) = -int_0^t grad e^{(t-s) lap} . ( u(s) L z(s) ) ds
//! L z(s)     = (1/tau) int_0^s grad e^{(s-s')(lap - gamma)/tau} z(s') ds'
//! ```
//!
//! Time integrals carry integrable singularities at s = 0, so quadrature
//! uses product integration on the graded grid t_j = T (j/n)^kappa: on each
//! subinterval the slab is frozen at its midpoint value (log-time linear
//! interpolation between the bracketing nodes) while the kernel factor is
//! integrated exactly per Fourier mode. No evaluation at s = 0 is needed;
//! the initial measure enters only through its heat evolution.
//!
//! Assembling all nodes at once uses the exact semigroup recursion
//! S(t_{j+1}) = e^{-mu (t_{j+1}-t_j)} S(t_j) + (last subinterval), which is
//! algebraically identical to the per-node sums exposed by [`apply_l`] and
//! [`apply_b`]; a test pins the two routes against each other.

use crate::error::{KsError, Result};
use crate::field::{self, combine, lp_norm, SpectralField, VectorField2D};
use crate::grid::Grid2D;
use crate::measure::{realize_measure, MollifiedMeasure};
use crate::params::Params;
use ndarray::Array2;
use rustfft::num_complex::Complex64;

/// Graded partition of [0, T]: t_j = T (j/n_t)^kappa for j = 0..=n_t.
/// kappa > 1 crowds nodes toward t = 0 where mild solutions are singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_t: usize,
    kappa: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_t: usize, kappa: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(KsError::InvalidArgument(format!(
                "horizon T = {horizon} must be positive"
            )));
        }
        if n_t < 4 {
            return Err(KsError::InvalidArgument(format!(
                "n_t = {n_t} must be at least 4"
            )));
        }
        if !(1.0..=8.0).contains(&kappa) {
            return Err(KsError::InvalidArgument(format!(
                "grading exponent kappa = {kappa} must lie in [1, 8]"
            )));
        }
        Ok(Self {
            horizon,
            n_t,
            kappa,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Node time t_j, exact at both endpoints.
    pub fn node(&self, j: usize) -> f64 {
        debug_assert!(j <= self.n_t);
        self.horizon * (j as f64 / self.n_t as f64).powf(self.kappa)
    }

    /// Arithmetic midpoint of subinterval [t_i, t_{i+1}].
    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.node(i) + self.node(i + 1))
    }
}

/// Value of a slab at t = 0. Measures keep their realized field alongside;
/// `Singular` marks slabs with no usable value at t = 0 (e.g. kernel probes),
/// whose first subinterval freezes at the t_1 field instead.
#[derive(Debug, Clone)]
pub enum SlabStart {
    Measure {
        measure: MollifiedMeasure,
        realized: SpectralField,
    },
    Field(SpectralField),
    Singular,
}

/// A field trajectory sampled on the nodes of a [`TimeGrid`]: one field per
/// node j >= 1 plus the start value.
#[derive(Debug, Clone)]
pub struct TimeSlab {
    spatial: Grid2D,
    tgrid: TimeGrid,
    start: SlabStart,
    fields: Vec<SpectralField>,
}

impl TimeSlab {
    pub fn from_fields(
        spatial: Grid2D,
        tgrid: TimeGrid,
        start: SlabStart,
        fields: Vec<SpectralField>,
    ) -> Result<Self> {
        if fields.len() != tgrid.len() {
            return Err(KsError::InvalidArgument(format!(
                "slab holds {} fields for {} nodes",
                fields.len(),
                tgrid.len()
            )));
        }
        for f in &fields {
            if f.grid() != spatial {
                return Err(KsError::GridMismatch {
                    expected: spatial,
                    found: f.grid(),
                });
            }
        }
        if let SlabStart::Field(f) | SlabStart::Measure { realized: f, .. } = &start {
            if f.grid() != spatial {
                return Err(KsError::GridMismatch {
                    expected: spatial,
                    found: f.grid(),
                });
            }
        }
        Ok(Self {
            spatial,
            tgrid,
            start,
            fields,
        })
    }

    /// Builds a slab by sampling `f` at every positive node.
    pub fn sample(
        spatial: Grid2D,
        tgrid: TimeGrid,
        start: SlabStart,
        f: impl Fn(f64) -> Result<SpectralField>,
    ) -> Result<Self> {
        let fields = (1..=tgrid.len())
            .map(|j| f(tgrid.node(j)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_fields(spatial, tgrid, start, fields)
    }

    /// Heat evolution e^{t lap} u0 of a measure, the zeroth Picard iterate.
    pub fn heat_from_measure(
        u0: &MollifiedMeasure,
        spatial: Grid2D,
        tgrid: TimeGrid,
    ) -> Result<Self> {
        let realized = realize_measure(u0, spatial)?;
        let fields = (1..=tgrid.len())
            .map(|j| field::heat_propagate(&realized, tgrid.node(j)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_fields(
            spatial,
            tgrid,
            SlabStart::Measure {
                measure: u0.clone(),
                realized,
            },
            fields,
        )
    }

    pub fn spatial(&self) -> Grid2D {
        self.spatial
    }

    pub fn tgrid(&self) -> TimeGrid {
        self.tgrid
    }

    pub fn start(&self) -> &SlabStart {
        &self.start
    }

    /// Field at node j >= 1.
    pub fn field(&self, j: usize) -> Result<&SpectralField> {
        if j == 0 || j > self.tgrid.len() {
            return Err(KsError::InvalidArgument(format!(
                "node index {j} outside 1..={}",
                self.tgrid.len()
            )));
        }
        Ok(&self.fields[j - 1])
    }

    pub fn fields(&self) -> &[SpectralField] {
        &self.fields
    }

    /// Slab coefficients frozen at the midpoint of subinterval i, by linear
    /// interpolation of the node fields in log time (which tracks the power
    /// law behavior of mild solutions near t = 0). The first subinterval has
    /// no left node in log time: with a start value present it interpolates
    /// linearly in t, otherwise it freezes at the t_1 field.
    pub(crate) fn midpoint_coeffs(&self, i: usize) -> Array2<Complex64> {
        let n_t = self.tgrid.len();
        debug_assert!(i < n_t);
        if i == 0 {
            let right = self.fields[0].coeffs();
            return match &self.start {
                SlabStart::Field(f) | SlabStart::Measure { realized: f, .. } => {
                    let left = f.coeffs();
                    // midpoint of [0, t_1] in linear time
                    left * 0.5 + right * 0.5
                }
                SlabStart::Singular => right.clone(),
            };
        }
        let (t0, t1) = (self.tgrid.node(i), self.tgrid.node(i + 1));
        let m = self.tgrid.midpoint(i);
        let w = (m.ln() - t0.ln()) / (t1.ln() - t0.ln());
        let left = self.fields[i - 1].coeffs();
        let right = self.fields[i].coeffs();
        left * (1.0 - w) + right * w
    }

    /// Weighted supremum norm max_j t_j^{1 - 1/p} |f(t_j)|_p over the
    /// positive nodes; finite exactly when the slab decays no worse than the
    /// heat evolution of a measure.
    pub fn triple_norm(&self, p: f64) -> Result<f64> {
        let mut best: f64 = 0.0;
        for j in 1..=self.tgrid.len() {
            let t = self.tgrid.node(j);
            let w = t.powf(1.0 - 1.0 / p);
            best = best.max(w * lp_norm(&self.fields[j - 1], p)?);
        }
        Ok(best)
    }

    /// Weighted distance max_j t_j^{1 - 1/p} |f(t_j) - g(t_j)|_p.
    pub fn distance(&self, other: &TimeSlab, p: f64) -> Result<f64> {
        self.check_compatible(other)?;
        let mut best: f64 = 0.0;
        for j in 1..=self.tgrid.len() {
            let t = self.tgrid.node(j);
            let diff = combine(1.0, &self.fields[j - 1], -1.0, &other.fields[j - 1])?;
            best = best.max(t.powf(1.0 - 1.0 / p) * lp_norm(&diff, p)?);
        }
        Ok(best)
    }

    fn check_compatible(&self, other: &TimeSlab) -> Result<()> {
        if self.spatial != other.spatial {
            return Err(KsError::GridMismatch {
                expected: self.spatial,
                found: other.spatial,
            });
        }
        if self.tgrid != other.tgrid {
            return Err(KsError::InvalidArgument(format!(
                "time grids differ: {:?} vs {:?}",
                self.tgrid, other.tgrid
            )));
        }
        Ok(())
    }
}

/// Exact integral of the screened kernel over [a, b] seen from target t,
/// folded with the 1/tau prefactor of L:
/// (1/tau) int_a^b e^{-lam (t-s)/tau} ds, stable for lam -> 0.
fn kernel_l(lam: f64, t: f64, a: f64, b: f64, tau: f64) -> f64 {
    if lam == 0.0 {
        return (b - a) / tau;
    }
    let tail = (-lam * (t - b) / tau).exp();
    let rise = -(-lam * (b - a) / tau).exp_m1();
    tail * rise / lam
}

/// Exact integral of the heat kernel over [a, b] seen from target t:
/// int_a^b e^{-mu (t-s)} ds, stable for mu -> 0.
fn kernel_b(mu: f64, t: f64, a: f64, b: f64) -> f64 {
    if mu == 0.0 {
        return b - a;
    }
    let tail = (-mu * (t - b)).exp();
    let rise = -(-mu * (b - a)).exp_m1();
    tail * rise / mu
}

fn squared_wavenumbers(grid: Grid2D) -> Array2<f64> {
    let n = grid.n();
    Array2::from_shape_fn((n, n), |(iy, ix)| {
        let ky = grid.wavenumber(iy);
        let kx = grid.wavenumber(ix);
        kx * kx + ky * ky
    })
}

/// Scalar potentials (1/tau) int_0^{m_i} e^{-(s-s')(lam)/tau} z ds' at every
/// subinterval midpoint, via the semigroup recursion. The gradient that
/// turns the potential into L z is applied by the caller.
pub(crate) fn l_potentials_at_midpoints(z: &TimeSlab, params: &Params) -> Vec<Array2<Complex64>> {
    let grid = z.spatial();
    let n_t = z.tgrid().len();
    let k2 = squared_wavenumbers(grid);
    let tau = params.tau;
    let gamma = params.gamma;

    let mut out = Vec::with_capacity(n_t);
    let mut acc: Array2<Complex64> = Array2::default(k2.dim());
    for i in 0..n_t {
        let m = z.tgrid().midpoint(i);
        let zi = z.midpoint_coeffs(i);
        if i == 0 {
            ndarray::Zip::from(&mut acc).and(&k2).and(&zi).for_each(|s, &k2, &zv| {
                *s = zv * kernel_l(k2 + gamma, m, 0.0, m, tau);
            });
        } else {
            let prev_m = z.tgrid().midpoint(i - 1);
            let t_i = z.tgrid().node(i);
            let zprev = z.midpoint_coeffs(i - 1);
            ndarray::Zip::from(&mut acc)
                .and(&k2)
                .and(&zprev)
                .and(&zi)
                .for_each(|s, &k2, &zp, &zv| {
                    let lam = k2 + gamma;
                    // e1 spans [t_i, m], e2 spans [prev_m, t_i]
                    let e1 = (-lam * (m - t_i) / tau).exp();
                    let e2 = (-lam * (t_i - prev_m) / tau).exp();
                    let decay = e1 * e2;
                    let (k_left, k_right) = if lam == 0.0 {
                        ((t_i - prev_m) / tau, (m - t_i) / tau)
                    } else {
                        (e1 * (1.0 - e2) / lam, (1.0 - e1) / lam)
                    };
                    *s = *s * decay + zp * k_left + zv * k_right;
                });
        }
        out.push(acc.clone());
    }
    out
}

/// Midpoint-frozen coefficients of the transported quantity u L z, the
/// integrand of the bilinear term, dealiased per component. `pots` are the
/// midpoint potentials of the z slab.
fn transport_from_potentials(
    u: &TimeSlab,
    pots: &[Array2<Complex64>],
) -> Vec<(Array2<Complex64>, Array2<Complex64>)> {
    let grid = u.spatial();
    (0..u.tgrid().len())
        .map(|i| {
            let u_mid = u.midpoint_coeffs(i);
            let (gx, gy) = field::grad_coeffs(grid, &pots[i]);
            let wx = field::product_coeffs(grid, &u_mid, &gx);
            let wy = field::product_coeffs(grid, &u_mid, &gy);
            (wx, wy)
        })
        .collect()
}

/// Bilinear term at every positive node via the semigroup recursion over the
/// midpoint-frozen transport. Returns coefficient arrays.
fn b_all_coeffs(u: &TimeSlab, z: &TimeSlab, params: &Params) -> Result<Vec<Array2<Complex64>>> {
    u.check_compatible(z)?;
    let pots = l_potentials_at_midpoints(z, params);
    Ok(b_all_from_potentials(u, &pots))
}

/// Same as [`b_all_coeffs`] with the z potentials precomputed, so a family
/// of u partners can share one z history.
pub(crate) fn b_all_from_potentials(
    u: &TimeSlab,
    pots: &[Array2<Complex64>],
) -> Vec<Array2<Complex64>> {
    let grid = u.spatial();
    let tg = u.tgrid();
    let k2 = squared_wavenumbers(grid);
    let w = transport_from_potentials(u, pots);

    let mut out = Vec::with_capacity(tg.len());
    let mut sx: Array2<Complex64> = Array2::default(k2.dim());
    let mut sy: Array2<Complex64> = Array2::default(k2.dim());
    for j in 1..=tg.len() {
        let (a, b) = (tg.node(j - 1), tg.node(j));
        let (wx, wy) = &w[j - 1];
        ndarray::Zip::from(&mut sx)
            .and(&mut sy)
            .and(&k2)
            .and(wx)
            .and(wy)
            .for_each(|sx, sy, &mu, &wx, &wy| {
                // decay over [t_{j-1}, t_j] and the fresh subinterval kernel,
                // sharing one exponential: kernel = (1 - decay)/mu.
                let decay = (-mu * (b - a)).exp();
                let fresh = if mu == 0.0 { b - a } else { (1.0 - decay) / mu };
                *sx = *sx * decay + wx * fresh;
                *sy = *sy * decay + wy * fresh;
            });
        let mut div = field::div_coeffs(grid, &sx, &sy);
        div.mapv_inplace(|c| -c);
        out.push(div);
    }
    out
}

/// Full bilinear-term slab B(u, z), starting from the zero field at t = 0.
pub fn bilinear_slab(u: &TimeSlab, z: &TimeSlab, params: &Params) -> Result<TimeSlab> {
    let coeffs = b_all_coeffs(u, z, params)?;
    slab_from_coeffs(u.spatial(), u.tgrid(), coeffs)
}

pub(crate) fn bilinear_slab_from_potentials(
    u: &TimeSlab,
    pots: &[Array2<Complex64>],
) -> Result<TimeSlab> {
    let coeffs = b_all_from_potentials(u, pots);
    slab_from_coeffs(u.spatial(), u.tgrid(), coeffs)
}

fn slab_from_coeffs(
    grid: Grid2D,
    tg: TimeGrid,
    coeffs: Vec<Array2<Complex64>>,
) -> Result<TimeSlab> {
    let fields = coeffs
        .into_iter()
        .map(|c| SpectralField::from_coeffs(grid, c))
        .collect::<Result<Vec<_>>>()?;
    TimeSlab::from_fields(grid, tg, SlabStart::Field(SpectralField::zero(grid)), fields)
}

/// L z at node `j`: the chemotactic drift generated by the history of z,
/// computed by direct product-integration summation (one kernel integral per
/// subinterval). Distinct target nodes are independent.
pub fn apply_l(z: &TimeSlab, j: usize, params: &Params) -> Result<VectorField2D> {
    let tg = z.tgrid();
    if j == 0 || j > tg.len() {
        return Err(KsError::InvalidArgument(format!(
            "target node {j} outside 1..={}",
            tg.len()
        )));
    }
    let grid = z.spatial();
    let k2 = squared_wavenumbers(grid);
    let t = tg.node(j);
    let mut pot: Array2<Complex64> = Array2::default(k2.dim());
    for i in 0..j {
        let (a, b) = (tg.node(i), tg.node(i + 1));
        let zi = z.midpoint_coeffs(i);
        ndarray::Zip::from(&mut pot).and(&k2).and(&zi).for_each(|s, &k2, &zv| {
            *s += zv * kernel_l(k2 + params.gamma, t, a, b, params.tau);
        });
    }
    let (gx, gy) = field::grad_coeffs(grid, &pot);
    VectorField2D::new(
        SpectralField::from_coeffs(grid, gx)?,
        SpectralField::from_coeffs(grid, gy)?,
    )
}

/// Bilinear Duhamel term B(u, z) at node `j` by direct summation.
pub fn apply_b(u: &TimeSlab, z: &TimeSlab, j: usize, params: &Params) -> Result<SpectralField> {
    u.check_compatible(z)?;
    let tg = u.tgrid();
    if j == 0 || j > tg.len() {
        return Err(KsError::InvalidArgument(format!(
            "target node {j} outside 1..={}",
            tg.len()
        )));
    }
    let grid = u.spatial();
    let k2 = squared_wavenumbers(grid);
    let t = tg.node(j);
    let pots = l_potentials_at_midpoints(z, params);
    let w = transport_from_potentials(u, &pots);
    let mut sx: Array2<Complex64> = Array2::default(k2.dim());
    let mut sy: Array2<Complex64> = Array2::default(k2.dim());
    for i in 0..j {
        let (a, b) = (tg.node(i), tg.node(i + 1));
        let (wx, wy) = &w[i];
        ndarray::Zip::from(&mut sx)
            .and(&mut sy)
            .and(&k2)
            .and(wx)
            .and(wy)
            .for_each(|sx, sy, &mu, &wx, &wy| {
                let kern = kernel_b(mu, t, a, b);
                *sx += wx * kern;
                *sy += wy * kern;
            });
    }
    let mut div = field::div_coeffs(grid, &sx, &sy);
    div.mapv_inplace(|c| -c);
    SpectralField::from_coeffs(grid, div)
}

/// One Duhamel application: node-wise e^{t lap} u0 + B(u, u)(t).
pub fn duhamel_rhs(u0: &MollifiedMeasure, u: &TimeSlab, params: &Params) -> Result<TimeSlab> {
    let realized = realize_measure(u0, u.spatial())?;
    duhamel_rhs_realized(u0, &realized, u, params)
}

fn duhamel_rhs_realized(
    u0: &MollifiedMeasure,
    realized: &SpectralField,
    u: &TimeSlab,
    params: &Params,
) -> Result<TimeSlab> {
    let grid = u.spatial();
    let tg = u.tgrid();
    let k2 = squared_wavenumbers(grid);
    let bs = b_all_coeffs(u, u, params)?;
    let u0c = realized.coeffs();
    let mut fields = Vec::with_capacity(tg.len());
    for j in 1..=tg.len() {
        let t = tg.node(j);
        let mut c = bs[j - 1].clone();
        ndarray::Zip::from(&mut c).and(&k2).and(u0c).for_each(|c, &k2, &u0| {
            *c += u0 * (-k2 * t).exp();
        });
        fields.push(SpectralField::from_coeffs(grid, c)?);
    }
    TimeSlab::from_fields(
        grid,
        tg,
        SlabStart::Measure {
            measure: u0.clone(),
            realized: realized.clone(),
        },
        fields,
    )
}

/// Convergence record of a Picard run.
#[derive(Debug, Clone)]
pub struct PicardReport {
    /// Number of Duhamel applications performed.
    pub iterations: usize,
    /// Weighted distances between successive iterates.
    pub residuals: Vec<f64>,
    /// Geometric mean of successive residual ratios (0 when fewer than two
    /// residuals were recorded).
    pub contraction_ratio: f64,
    pub converged: bool,
}

impl PicardReport {
    fn from_history(residuals: Vec<f64>, converged: bool) -> Self {
        let contraction_ratio = if residuals.len() >= 2 {
            let first = residuals[0].max(f64::MIN_POSITIVE);
            let last = residuals[residuals.len() - 1];
            (last / first).powf(1.0 / (residuals.len() - 1) as f64)
        } else {
            0.0
        };
        Self {
            iterations: residuals.len(),
            residuals,
            contraction_ratio,
            converged,
        }
    }
}

/// Picard iteration for the mild fixed point, started from the heat
/// evolution of `u0`.
///
/// Stops when the weighted distance between successive iterates drops below
/// `tol`. Three consecutive expanding steps abort with
/// [`KsError::NonContraction`], which names the measured ratio and a
/// relaxation time for which the iteration is expected to contract.
pub fn picard_solve(
    u0: &MollifiedMeasure,
    spatial: Grid2D,
    tgrid: TimeGrid,
    params: &Params,
    p: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(TimeSlab, PicardReport)> {
    let start = TimeSlab::heat_from_measure(u0, spatial, tgrid)?;
    picard_solve_from(u0, start, params, p, tol, max_iter)
}

/// Picard iteration from an explicit starting slab (used to probe
/// uniqueness of the small-data fixed point).
pub fn picard_solve_from(
    u0: &MollifiedMeasure,
    start: TimeSlab,
    params: &Params,
    p: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(TimeSlab, PicardReport)> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(KsError::InvalidArgument(format!(
            "norm exponent p = {p} must be finite and exceed 1"
        )));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(KsError::InvalidArgument(
            "tolerance must be positive and max_iter nonzero".into(),
        ));
    }
    let realized = realize_measure(u0, start.spatial())?;
    let mut current = start;
    let mut residuals = Vec::new();
    let mut expanding = 0usize;
    for _ in 0..max_iter {
        let next = duhamel_rhs_realized(u0, &realized, &current, params)?;
        let d = next.distance(&current, p)?;
        if let Some(&prev) = residuals.last() {
            if d > prev {
                expanding += 1;
                if expanding >= 3 {
                    let ratio = d / prev;
                    let suggested = suggest_tau(u0, p, midpoint_q(p)).unwrap_or(f64::INFINITY);
                    return Err(KsError::NonContraction {
                        ratio,
                        suggested_tau: suggested.max(params.tau * 4.0),
                    });
                }
            } else {
                expanding = 0;
            }
        }
        residuals.push(d);
        current = next;
        if d <= tol {
            return Ok((current, PicardReport::from_history(residuals, true)));
        }
    }
    log::warn!(
        "Picard iteration stopped after {max_iter} applications with residual {:?}",
        residuals.last()
    );
    Ok((current, PicardReport::from_history(residuals, false)))
}

/// Geometric midpoint of the admissible companion exponents for p, used when
/// a contraction failure needs a default q to quote a workable tau.
fn midpoint_q(p: f64) -> f64 {
    let lo = p / (p - 1.0);
    let hi = 2.0 * p / (2.0 - p);
    (lo * hi).sqrt()
}

/// Smallest relaxation time on a quarter-decade log grid for which the
/// calibrated smallness condition 4 eta(tau) |u0| C < 1 holds, where |u0| is
/// the total variation of the measure and C the sharp measure-smoothing
/// constant (4 pi)^{1/p - 1} p^{-1/p}.
///
/// The eta model is an empirical lower envelope, so it is inflated by a
/// safety factor before use; the result is a heuristic starting point, not a
/// guarantee.
pub fn suggest_tau(u0: &MollifiedMeasure, p: f64, q: f64) -> Result<f64> {
    let exponents = crate::estimates::ExponentSet::new(p, q)?;
    let tv: f64 = u0.atoms().iter().map(|a| a.mass.abs()).sum::<f64>()
        + u0
            .background()
            .map(|b| lp_norm(b, 1.0))
            .transpose()?
            .unwrap_or(0.0);
    if tv == 0.0 {
        return Ok(1.0);
    }
    let smoothing = (4.0 * std::f64::consts::PI).powf(1.0 / p - 1.0) * p.powf(-1.0 / p);
    let r = tv * smoothing;

    let model = crate::estimates::eta_empirical_desk(&exponents)?;
    const SAFETY: f64 = 3.0;
    let c = model.c_fit * SAFETY;
    // c tau^decay * r < 1/4  with decay < 0
    let tau_min = (4.0 * c * r).powf(-1.0 / model.decay_exponent);
    // snap up to the quarter-decade grid, never below 1
    let steps = (tau_min.log10() * 4.0).ceil().max(0.0);
    Ok(10f64.powf(steps / 4.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gauss_kernel;
    use approx::assert_relative_eq;

    fn grid() -> Grid2D {
        Grid2D::new(64, 20.0).unwrap()
    }

    fn heat_probe(grid: Grid2D, tgrid: TimeGrid, mass: f64, dilation: f64) -> TimeSlab {
        TimeSlab::sample(grid, tgrid, SlabStart::Singular, |t| {
            gauss_kernel(grid, mass, (0.0, 0.0), dilation * t)
        })
        .unwrap()
    }

    #[test]
    fn time_grid_nodes_are_graded_and_exact() {
        let tg = TimeGrid::new(2.0, 8, 2.0).unwrap();
        assert_eq!(tg.node(0), 0.0);
        assert_eq!(tg.node(8), 2.0);
        assert_relative_eq!(tg.node(4), 0.5);
        let mut prev = 0.0;
        for j in 1..=8 {
            assert!(tg.node(j) > prev);
            prev = tg.node(j);
        }
        assert!(TimeGrid::new(0.0, 8, 2.0).is_err());
        assert!(TimeGrid::new(1.0, 2, 2.0).is_err());
        assert!(TimeGrid::new(1.0, 8, 0.5).is_err());
    }

    #[test]
    fn l_of_zero_slab_vanishes() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 8, 2.0).unwrap();
        let z = TimeSlab::sample(g, tg, SlabStart::Singular, |_| Ok(SpectralField::zero(g)))
            .unwrap();
        let params = Params::new(1.0, 0.0).unwrap();
        let l = apply_l(&z, 8, &params).unwrap();
        assert_eq!(l.sup_norm(), 0.0);
    }

    #[test]
    fn l_recursion_matches_direct_sum() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 12, 2.0).unwrap();
        let z = heat_probe(g, tg, 2.0, 0.7);
        let params = Params::new(2.5, 0.3).unwrap();
        let pots = l_potentials_at_midpoints(&z, &params);
        // direct sum at the midpoint of the last subinterval
        let i = 11usize;
        let t = tg.midpoint(i);
        let k2 = squared_wavenumbers(g);
        let mut pot: Array2<Complex64> = Array2::default(k2.dim());
        for s in 0..=i {
            let (a, b) = (tg.node(s), (tg.node(s + 1)).min(t));
            let zi = z.midpoint_coeffs(s);
            ndarray::Zip::from(&mut pot).and(&k2).and(&zi).for_each(|p, &k2, &zv| {
                *p += zv * kernel_l(k2 + params.gamma, t, a, b, params.tau);
            });
        }
        let scale = pot.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in pots[i].iter().zip(pot.iter()) {
            assert!((a - b).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn b_direct_matches_recursion_at_every_node() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 10, 2.0).unwrap();
        let u = heat_probe(g, tg, 1.5, 1.0);
        let z = heat_probe(g, tg, 0.8, 0.4);
        let params = Params::new(3.0, 0.1).unwrap();
        let all = b_all_coeffs(&u, &z, &params).unwrap();
        for j in [1usize, 4, 10] {
            let direct = apply_b(&u, &z, j, &params).unwrap();
            let scale = all[j - 1].iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in direct.coeffs().iter().zip(all[j - 1].iter()) {
                assert!((a - b).norm() / scale < 1e-11, "node {j}");
            }
        }
    }

    #[test]
    fn l_scaling_slope_matches_probe_exponent() {
        // For z(s) the unit heat kernel and tau = 1, gamma = 0, L z is
        // exactly self-similar: |L z(t)|_q = t^{1/q - 1/2} |L z(1)|_q.
        let g = Grid2D::new(128, 30.0).unwrap();
        let tg = TimeGrid::new(4.0, 384, 2.0).unwrap();
        let z = heat_probe(g, tg, 1.0, 1.0);
        let params = Params::new(1.0, 0.0).unwrap();
        let q = 4.0;
        let targets: Vec<usize> = (1..=tg.len())
            .filter(|&j| tg.node(j) >= 0.25)
            .step_by(24)
            .collect();
        let mut pts = Vec::new();
        for &j in &targets {
            let l = apply_l(&z, j, &params).unwrap();
            let nx = lp_norm(&l.x, q).unwrap();
            let ny = lp_norm(&l.y, q).unwrap();
            pts.push((tg.node(j).ln(), nx.hypot(ny).ln()));
        }
        let slope = fit_slope(&pts);
        assert!((slope - (1.0 / q - 0.5)).abs() < 2e-3, "slope {slope}");
    }

    fn fit_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn duhamel_of_zero_slab_is_heat_evolution() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 8, 2.0).unwrap();
        let u0 = MollifiedMeasure::atom(0.5, 0.8);
        let zero = TimeSlab::sample(g, tg, SlabStart::Singular, |_| Ok(SpectralField::zero(g)))
            .unwrap();
        let params = Params::new(1.0, 0.0).unwrap();
        let rhs = duhamel_rhs(&u0, &zero, &params).unwrap();
        let heat = TimeSlab::heat_from_measure(&u0, g, tg).unwrap();
        assert!(rhs.distance(&heat, 2.0).unwrap() < 1e-14);
    }

    #[test]
    fn picard_on_empty_measure_returns_zero_in_one_iteration() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 8, 2.0).unwrap();
        let u0 = MollifiedMeasure::new();
        let params = Params::new(1.0, 0.0).unwrap();
        let (slab, report) = picard_solve(&u0, g, tg, &params, 1.5, 1e-10, 5).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        assert_eq!(slab.triple_norm(1.5).unwrap(), 0.0);
    }

    #[test]
    fn picard_converges_for_small_mass_and_conserves_it() {
        let g = grid();
        let tg = TimeGrid::new(1.0, 24, 2.0).unwrap();
        let u0 = MollifiedMeasure::atom(0.1, 0.9);
        let params = Params::new(1.0, 0.0).unwrap();
        let (slab, report) = picard_solve(&u0, g, tg, &params, 1.5, 1e-10, 30).unwrap();
        assert!(report.converged, "residuals {:?}", report.residuals);
        assert!(report.contraction_ratio < 1.0);
        for j in 1..=tg.len() {
            assert_relative_eq!(slab.field(j).unwrap().mass(), 0.1, max_relative = 1e-10);
        }
        // fixed point property
        let again = duhamel_rhs(&u0, &slab, &params).unwrap();
        assert!(slab.distance(&again, 1.5).unwrap() <= 2e-10);
    }

    #[test]
    fn triple_norm_of_heat_slab_matches_kernel_constant() {
        // t^{1 - 1/p} |e^{t lap} u0|_p for a point-like atom approaches
        // m (4 pi)^{1/p - 1} p^{-1/p}; with mollification width eps the node
        // values are exact after replacing t by t + eps^2/2.
        let g = Grid2D::new(128, 30.0).unwrap();
        let tg = TimeGrid::new(2.0, 16, 2.0).unwrap();
        let m = 0.7;
        let slab = TimeSlab::heat_from_measure(&MollifiedMeasure::atom(m, 0.5), g, tg).unwrap();
        let p = 2.0;
        let measured = slab.triple_norm(p).unwrap();
        let t = tg.node(16);
        let shifted = t / (t + 0.125);
        let expect =
            m * (8.0 * std::f64::consts::PI).powf(-0.5) * shifted.powf(1.0 - 1.0 / p);
        assert_relative_eq!(measured, expect, max_relative = 1e-6);
    }
}
