//! The acceptance suite: one function per numbered claim the library is
//! built to demonstrate, from heat-kernel exactness up to the non-uniqueness
//! exhibit. Each check returns a [`CriterionOutcome`] with a one-line
//! verdict; the `validate` subcommand and the `acceptance` integration test
//! both drain [`run_all`].
//!
//! Tolerances are part of the contract and are hard-coded at full scale.
//! Reduced mode shrinks grids and quadrature counts for smoke runs and
//! scales the resolution-limited tolerances accordingly, recording a
//! warning on every check it loosens; closed-form identities stay exact.

use crate::error::Result;
use crate::estimates::{
    self, beta_constant, eta_empirical, smoothing_constant, weak_attainment_probe,
    EtaProbeSettings, ExponentSet, QuadraticToy, TestFunction,
};
use crate::evolution::{
    self, run_state, BlowupDetector, EvolutionState, RunStatus, StepController,
};
use crate::field::{self, gauss_kernel, heat_propagate, lp_norm, SpectralField};
use crate::grid::Grid2D;
use crate::measure::{realize_measure, Atom, MollifiedMeasure};
use crate::mild::{apply_l, bilinear_slab, picard_solve, SlabStart, TimeGrid, TimeSlab};
use crate::params::Params;
use crate::selfsim::{
    find_tau_star, integrate_profile, m_tau_trend, mass_curve, profile_to_initial_state,
    MassPair, OdeSettings,
};

const PI: f64 = std::f64::consts::PI;

/// Verdict of one acceptance check.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Measured numbers against their tolerances, one line.
    pub details: String,
    pub warnings: Vec<String>,
}

impl CriterionOutcome {
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:02} {} {}: {}",
            self.id,
            if self.passed { "pass" } else { "FAIL" },
            self.name,
            self.details
        )
    }
}

pub const CRITERION_COUNT: usize = 12;

pub fn criterion_name(id: usize) -> &'static str {
    match id {
        1 => "heat propagator exactness",
        2 => "measure smoothing constants",
        3 => "beta integral identity",
        4 => "bilinear scaling slopes",
        5 => "eta decay in tau",
        6 => "picard contraction and cross-solver agreement",
        7 => "solution smoothing bounds",
        8 => "large relaxation time global run",
        9 => "self-similar mass landscape",
        10 => "non-uniqueness exhibit",
        11 => "quadratic toy fixed points",
        12 => "weak attainment rate",
        _ => "unknown",
    }
}

/// Runs one check; internal errors become failing outcomes rather than
/// aborting the table.
pub fn run_criterion(id: usize, reduced: bool) -> CriterionOutcome {
    let result = match id {
        1 => heat_exactness(reduced),
        2 => smoothing_constants(reduced),
        3 => beta_identity(reduced),
        4 => bilinear_slopes(reduced),
        5 => eta_decay(reduced),
        6 => picard_cross_agreement(reduced),
        7 => solution_smoothing(reduced),
        8 => large_tau_run(reduced),
        9 => selfsim_landscape(reduced),
        10 => non_uniqueness(reduced),
        11 => quadratic_toy(reduced),
        12 => weak_attainment_rate(reduced),
        _ => {
            return CriterionOutcome {
                id,
                name: "unknown",
                passed: false,
                details: format!("no criterion numbered {id}"),
                warnings: Vec::new(),
            }
        }
    };
    match result {
        Ok(outcome) => outcome,
        Err(e) => CriterionOutcome {
            id,
            name: criterion_name(id),
            passed: false,
            details: format!("errored: {e}"),
            warnings: Vec::new(),
        },
    }
}

/// Runs every check in order.
pub fn run_all(reduced: bool) -> Vec<CriterionOutcome> {
    (1..=CRITERION_COUNT)
        .map(|id| run_criterion(id, reduced))
        .collect()
}

fn outcome(
    id: usize,
    passed: bool,
    details: String,
    warnings: Vec<String>,
) -> CriterionOutcome {
    CriterionOutcome {
        id,
        name: criterion_name(id),
        passed,
        details,
        warnings,
    }
}

fn reduced_warning(warnings: &mut Vec<String>, factor: f64) {
    warnings.push(format!(
        "reduced resolution: tolerances scaled by {factor}"
    ));
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    estimates::slope_with_stderr(pts).0
}

/// 1: a Gaussian stays a Gaussian under the propagator, with the time added
/// to the kernel parameter, and the semigroup composes exactly.
fn heat_exactness(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let n = if reduced { 128 } else { 256 };
    if reduced {
        warnings.push("reduced resolution: exactness is n-independent, tolerances kept".into());
    }
    let grid = Grid2D::new(n, 40.0)?;
    let s0 = 1.0;
    let t = 1.2;
    let input = gauss_kernel(grid, 2.0, (1.5, -2.0), s0)?;
    let propagated = heat_propagate(&input, t)?;
    let exact = gauss_kernel(grid, 2.0, (1.5, -2.0), s0 + t)?;
    let diff = field::combine(1.0, &propagated, -1.0, &exact)?;
    let rel = lp_norm(&diff, f64::INFINITY)? / lp_norm(&exact, f64::INFINITY)?;

    let two_step = heat_propagate(&heat_propagate(&input, 0.4)?, 0.8)?;
    let one_step = heat_propagate(&input, 1.2)?;
    let comp_diff = field::combine(1.0, &two_step, -1.0, &one_step)?;
    let comp = lp_norm(&comp_diff, f64::INFINITY)? / lp_norm(&one_step, f64::INFINITY)?;

    let passed = rel < 1e-8 && comp < 1e-13;
    Ok(outcome(
        1,
        passed,
        format!("gaussian-out error {rel:.2e} (tol 1e-8), composition error {comp:.2e} (tol 1e-13)"),
        warnings,
    ))
}

/// 2: the weighted norm of the propagated atom reproduces the sharp
/// smoothing constant (4 pi)^{1/p-1} p^{-1/p}; the mollification shows up
/// only as an exact shift of the effective time.
fn smoothing_constants(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let n = if reduced { 128 } else { 256 };
    if reduced {
        warnings.push("reduced resolution: constants still exact, tolerances kept".into());
    }
    let grid = Grid2D::new(n, 40.0)?;
    let eps = 0.5;
    let u0 = MollifiedMeasure::atom(1.0, eps);
    let realized = realize_measure(&u0, grid)?;
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for &p in &[1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
        for &t in &[2.0, 4.0] {
            let u_t = heat_propagate(&realized, t)?;
            // the realized atom is the heat kernel at time eps^2/2, so the
            // measured curve sits at the shifted time exactly
            let t_eff = t + eps * eps / 2.0;
            let exponent = if p.is_infinite() { 1.0 } else { 1.0 - 1.0 / p };
            let measured = t_eff.powf(exponent) * lp_norm(&u_t, p)?;
            let rel = (measured - smoothing_constant(p)).abs() / smoothing_constant(p);
            worst = worst.max(rel);
            if p == 2.0 && t == 4.0 {
                detail = format!("p=2 constant {measured:.5} vs 0.19947");
            }
        }
    }
    let passed = worst < 1e-4;
    Ok(outcome(
        2,
        passed,
        format!("{detail}, worst relative error {worst:.2e} (tol 1e-4)"),
        warnings,
    ))
}

/// Direct product-integration quadrature of
/// int_0^t (t-s)^{a-1} s^{b-1} ds with both endpoint singularities handled
/// by exact cell masses of the singular factor against midpoint values of
/// the smooth one. Independent oracle for the Beta identity.
fn singular_quadrature(a: f64, b: f64, t: f64, cells: usize) -> f64 {
    let half = 0.5 * t;
    let grade = 4.0;
    let mut total = 0.0;
    for k in 0..cells {
        let s0 = half * (k as f64 / cells as f64).powf(grade);
        let s1 = half * ((k + 1) as f64 / cells as f64).powf(grade);
        let mid = 0.5 * (s0 + s1);
        // [0, t/2]: s^{b-1} singular at 0, (t-s)^{a-1} smooth
        total += (s1.powf(b) - s0.powf(b)) / b * (t - mid).powf(a - 1.0);
        // [t/2, t] mirrored: (t-s)^{a-1} singular at t
        total += (s1.powf(a) - s0.powf(a)) / a * (t - mid).powf(b - 1.0);
    }
    total
}

/// 3: the closed-form Beta constant times t^{1/p-1} equals the singular
/// convolution integral it is meant to replace.
fn beta_identity(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let (cells, tol) = if reduced { (4000, 1e-5) } else { (24000, 1e-6) };
    if reduced {
        reduced_warning(&mut warnings, 10.0);
    }
    let exps = ExponentSet::new(1.5, 4.0)?;
    let a = 0.5 - 1.0 / exps.q();
    let b = 1.0 / exps.p() + 1.0 / exps.q() - 0.5;
    let constant = beta_constant(&exps);
    let mut worst = 0.0f64;
    for &t in &[0.5f64, 1.0, 2.0] {
        let closed = constant * t.powf(1.0 / exps.p() - 1.0);
        let direct = singular_quadrature(a, b, t, cells);
        worst = worst.max((closed - direct).abs() / direct);
    }
    Ok(outcome(
        3,
        worst < tol,
        format!("worst relative gap {worst:.2e} over t in {{0.5, 1, 2}} (tol {tol:.0e})"),
        warnings,
    ))
}

/// 4: on heat-kernel probe slabs the operator norms follow their predicted
/// power laws: |Lz(t)|_q ~ t^{1/q-1/2} and |B(u,z)(t)|_p ~ t^{1/p-1}.
fn bilinear_slopes(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let (n, n_t, tol) = if reduced { (128, 256, 8e-3) } else { (256, 768, 1e-3) };
    if reduced {
        reduced_warning(&mut warnings, 8.0);
    }
    let grid = Grid2D::new(n, 30.0)?;
    let tgrid = TimeGrid::new(4.0, n_t, 2.0)?;
    let params = Params::new(2.0, 0.0)?;
    let exps = ExponentSet::new(1.5, 4.0)?;
    let probe = TimeSlab::sample(grid, tgrid, SlabStart::Singular, |t| {
        gauss_kernel(grid, 1.0, (0.0, 0.0), t)
    })?;

    // fit over the last octave of nodes, sampled evenly
    let fit_nodes: Vec<usize> = {
        let lo = (1..=tgrid.len())
            .find(|&j| tgrid.node(j) >= 1.0)
            .unwrap_or(1);
        (lo..=tgrid.len()).step_by(((tgrid.len() - lo) / 15).max(1)).collect()
    };

    let mut l_pts = Vec::new();
    for &j in &fit_nodes {
        let l = apply_l(&probe, j, &params)?;
        let norm = lp_norm(&l.x, exps.q())?.hypot(lp_norm(&l.y, exps.q())?);
        l_pts.push((tgrid.node(j).ln(), norm.ln()));
    }
    let l_slope = fit_slope(&l_pts);
    let l_target = 1.0 / exps.q() - 0.5;

    let b_slab = bilinear_slab(&probe, &probe, &params)?;
    let mut b_pts = Vec::new();
    for &j in &fit_nodes {
        b_pts.push((tgrid.node(j).ln(), lp_norm(b_slab.field(j)?, exps.p())?.ln()));
    }
    let b_slope = fit_slope(&b_pts);
    let b_target = 1.0 / exps.p() - 1.0;

    let l_err = (l_slope - l_target).abs();
    let b_err = (b_slope - b_target).abs();
    Ok(outcome(
        4,
        l_err < tol && b_err < tol,
        format!(
            "L slope {l_slope:.5} vs {l_target:.5}, B slope {b_slope:.5} vs {b_target:.5} (tol {tol:.0e})"
        ),
        warnings,
    ))
}

/// 5: the empirical bilinear constant decays in tau with the predicted
/// exponent 1/p - 1/q - 1/2 = -1/12 at (3/2, 4).
fn eta_decay(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    // sharp pairs sit at dilation ~ 1/tau, so the dilation list spans the
    // tau list; the grid must resolve heat time w_min (k_max^2 w_min >> 1)
    let (taus, dilations, n, slope_band) = if reduced {
        (vec![1.0, 5.0, 25.0], vec![1.0, 0.2, 0.04], 128, 0.30)
    } else {
        (
            vec![1.0, 3.0, 10.0, 30.0, 100.0],
            vec![1.0, 1.0 / 3.0, 0.1, 1.0 / 30.0, 0.01, 1.0 / 300.0],
            256,
            0.15,
        )
    };
    if reduced {
        reduced_warning(&mut warnings, 2.0);
    }
    let exps = ExponentSet::new(1.5, 4.0)?;
    let settings = EtaProbeSettings {
        grid: Grid2D::new(n, 15.0)?,
        tgrid: TimeGrid::new(1.0, 16, 2.0)?,
        dilations,
        gamma: 0.0,
    };
    let model = eta_empirical(&exps, &taus, &settings)?;
    let target = exps.decay_exponent();
    let slope_ok = (model.fitted_slope - target).abs() <= slope_band * target.abs();
    let decreasing = model
        .samples
        .windows(2)
        .all(|w| w[1].eta < w[0].eta);
    let argmax: Vec<String> = model
        .samples
        .iter()
        .map(|s| format!("tau {} -> w_z {:.3}", s.tau, s.w_z))
        .collect();
    Ok(outcome(
        5,
        slope_ok && decreasing,
        format!(
            "fitted slope {:.4} vs {:.4} (band {:.0}%), strictly decreasing: {}, sharp probes: [{}]",
            model.fitted_slope,
            target,
            slope_band * 100.0,
            decreasing,
            argmax.join(", ")
        ),
        warnings,
    ))
}

/// 6: small-mass fixed point: geometric Picard convergence, and the
/// converged trajectory agrees with the direct integrator at the horizon.
fn picard_cross_agreement(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let (n, n_t, dt_max, tol_cross) = if reduced {
        (64, 32, 0.01, 5e-4)
    } else {
        (128, 64, 0.005, 1e-4)
    };
    if reduced {
        reduced_warning(&mut warnings, 5.0);
    }
    let grid = Grid2D::new(n, 30.0)?;
    let eps = if reduced { 0.95 } else { 0.5 };
    let mass = 0.1;
    let u0 = MollifiedMeasure::atom(mass, eps);
    let tgrid = TimeGrid::new(1.0, n_t, 2.0)?;
    let params = Params::new(1.0, 0.0)?;
    let tol = 1e-9;
    let (slab, report) = picard_solve(&u0, grid, tgrid, &params, 1.5, tol, 30)?;

    let last_residual = report.residuals.last().copied().unwrap_or(f64::NAN);
    let contraction_ok = report.converged && report.contraction_ratio < 1.0;
    let residual_ok = last_residual < 2.0 * tol;

    let mut mass_drift = 0.0f64;
    for j in 1..=tgrid.len() {
        mass_drift = mass_drift.max((slab.field(j)?.mass() - mass).abs() / mass);
    }

    let initial = EvolutionState::from_measure(&u0, grid, params)?;
    let detector = BlowupDetector::defaults_for(&initial)?;
    let ctrl = StepController::new(1e-4, 0.4, 1e-10, dt_max)?;
    let out = run_state(initial, 1.0, ctrl, &[], &detector)?;
    let diff = field::combine(1.0, slab.field(tgrid.len())?, -1.0, &out.final_state.u)?;
    let cross = lp_norm(&diff, 2.0)? / lp_norm(&out.final_state.u, 2.0)?;

    let passed = contraction_ok && residual_ok && mass_drift < 1e-8 && cross < tol_cross;
    Ok(outcome(
        6,
        passed,
        format!(
            "ratio {:.3}, residual {:.1e} (tol {:.1e}), cross-solver gap {:.2e} (tol {:.0e}), mass drift {:.1e}",
            report.contraction_ratio,
            last_residual,
            2.0 * tol,
            cross,
            tol_cross,
            mass_drift
        ),
        warnings,
    ))
}

/// 7: the converged solution has finite weighted norms across the exponent
/// range, with the sup-norm curve flat to within a factor of 3.
fn solution_smoothing(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let (n, n_t) = if reduced { (64, 32) } else { (128, 64) };
    if reduced {
        warnings.push("reduced resolution: finiteness checks unchanged".into());
    }
    let grid = Grid2D::new(n, 40.0)?;
    let u0 = MollifiedMeasure::atom(0.1, 0.75f64.max(2.5 * grid.spacing()));
    let tgrid = TimeGrid::new(10.0, n_t, 2.0)?;
    let params = Params::new(1.0, 0.0)?;
    let (slab, _) = picard_solve(&u0, grid, tgrid, &params, 1.5, 1e-9, 30)?;

    let saturation = slab.field(tgrid.len())?.domain_saturation();
    if saturation > 1e-8 {
        warnings.push(format!(
            "domain saturation {saturation:.1e} at the horizon (box truncation visible)"
        ));
    }

    let mut all_finite = true;
    let mut sup_curve = Vec::new();
    for &p in &[1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
        let exponent = if p.is_infinite() { 1.0 } else { 1.0 - 1.0 / p };
        for j in 1..=tgrid.len() {
            let r = tgrid.node(j).powf(exponent) * lp_norm(slab.field(j)?, p)?;
            all_finite &= r.is_finite();
            if p.is_infinite() {
                sup_curve.push(r);
            }
        }
    }
    let mut sorted = sup_curve.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let peak = sorted.last().copied().unwrap_or(f64::NAN);
    let flat = peak <= 3.0 * median;
    Ok(outcome(
        7,
        all_finite && flat,
        format!(
            "weighted norms finite for p in {{1, 3/2, 2, 4, inf}}; sup curve peak {:.3e} vs 3x median {:.3e}",
            peak,
            3.0 * median
        ),
        warnings,
    ))
}

/// 8: a ten-critical-masses atom at large relaxation time runs to the
/// horizon with no detector flag and exact mass bookkeeping.
fn large_tau_run(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let n = if reduced { 64 } else { 128 };
    if reduced {
        warnings.push("reduced resolution: verdict and drift checks unchanged".into());
    }
    let grid = Grid2D::new(n, 30.0)?;
    let eps = (2.5 * grid.spacing()).max(0.5);
    let mass = 10.0 * PI;
    let u0 = MollifiedMeasure::atom(mass, eps);
    let params = Params::new(50.0, 0.0)?;
    let initial = EvolutionState::from_measure(&u0, grid, params)?;
    let detector = BlowupDetector::defaults_for(&initial)?;
    let ctrl = StepController::new(1e-3, 0.4, 1e-10, 0.05)?;
    let start = std::time::Instant::now();
    let out = run_state(initial, 10.0, ctrl, &[], &detector)?;
    let elapsed = start.elapsed().as_secs_f64();

    let drift = out
        .series
        .iter()
        .map(|row| (row.mass - mass).abs() / mass)
        .fold(0.0f64, f64::max);
    let passed = out.verdict.status == RunStatus::Completed && drift < 1e-8 && elapsed < 600.0;
    Ok(outcome(
        8,
        passed,
        format!(
            "verdict {}, mass drift {:.1e} (tol 1e-8), {:.1}s of 600s budget",
            out.verdict.status, drift, elapsed
        ),
        warnings,
    ))
}

/// 9: the radial shooter reproduces the whole mass landscape: the linear
/// law at small a, the critical-mass ceiling at low tau, pairs above the
/// ceiling at tau = 10, the monotonicity threshold near 0.64, the plug-in
/// bound at tau = 100 and strict growth of the maximal mass.
fn selfsim_landscape(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let (settings, residual_tol) = if reduced {
        (
            OdeSettings {
                rel_tol: 1e-8,
                abs_tol: 1e-10,
                ..OdeSettings::default()
            },
            1e-6,
        )
    } else {
        (OdeSettings::default(), 1e-8)
    };
    if reduced {
        reduced_warning(&mut warnings, 100.0);
    }
    let mut failures = Vec::new();

    // (a) small-a mass law
    let small = integrate_profile(0.01, 1.0, &settings)?;
    let small_rel = (small.mass() - 4.0 * PI * 0.01).abs() / (4.0 * PI * 0.01);
    if small_rel > 0.02 {
        failures.push(format!("small-a law off by {small_rel:.3}"));
    }

    // (b) low tau never beats the critical mass
    let grid_a = crate::selfsim::default_a_grid();
    let low = mass_curve(0.5, &grid_a, &settings)?;
    if low.m_tau > 8.0 * PI + 0.1 {
        failures.push(format!("tau=0.5 peak {:.4} above 8 pi + 0.1", low.m_tau));
    }

    // (c) tau = 10: supercritical peak with an equal-mass pair above 8 pi
    let ten = mass_curve(10.0, &grid_a, &settings)?;
    let super_pair = ten.pairs.iter().find(|p| p.mass > 8.0 * PI).copied();
    if ten.m_tau <= 8.0 * PI {
        failures.push(format!("tau=10 peak {:.4} not above 8 pi", ten.m_tau));
    }
    match super_pair {
        None => failures.push("no equal-mass pair above 8 pi at tau=10".into()),
        Some(pair) => {
            for a in [pair.a1, pair.a2] {
                let p = integrate_profile(a, 10.0, &settings)?;
                if p.residual_max() > residual_tol
                    || p.first_integral_residual() > residual_tol
                {
                    failures.push(format!(
                        "pair profile a={a:.4} residuals {:.1e}/{:.1e} above {residual_tol:.0e}",
                        p.residual_max(),
                        p.first_integral_residual()
                    ));
                }
            }
        }
    }

    // (d) the monotonicity threshold
    let tau_star = find_tau_star(0.5, 0.8, &settings)?;
    if !(0.55 < tau_star && tau_star < 0.75) {
        failures.push(format!("tau* = {tau_star:.3} outside (0.55, 0.75)"));
    }

    // (e) tau = 100 against the plug-in growth bound
    let hundred = mass_curve(100.0, &grid_a, &settings)?;
    let bound_100 = 4.0 * PI / std::f64::consts::E * 99.0 / 100.0f64.ln();
    if hundred.m_tau < bound_100 {
        failures.push(format!(
            "tau=100 peak {:.3} below bound {bound_100:.3}",
            hundred.m_tau
        ));
    }

    // (f) strict growth of the maximal mass
    let trend = m_tau_trend(&[2.0, 10.0, 100.0], &settings)?;
    for point in &trend {
        if point.lower_bound > 8.0 * PI && point.m_tau < point.lower_bound {
            failures.push(format!(
                "m_tau({}) = {:.3} below its bound {:.3}",
                point.tau, point.m_tau, point.lower_bound
            ));
        }
    }

    let passed = failures.is_empty();
    let details = if passed {
        format!(
            "tau*={tau_star:.3}, peaks: {:.2} (tau=0.5) / {:.2} (10) / {:.2} (100), pair ({:.3}, {:.3})",
            low.m_tau,
            ten.m_tau,
            hundred.m_tau,
            super_pair.map_or(f64::NAN, |p| p.a1),
            super_pair.map_or(f64::NAN, |p| p.a2),
        )
    } else {
        failures.join("; ")
    };
    Ok(outcome(9, passed, details, warnings))
}

/// 10: two profiles of equal mass, embedded and evolved, each track their
/// own scaling form while remaining far apart: non-uniqueness at desk scale.
fn non_uniqueness(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    // the defect is time-integration dominated (spatial error at n = 256 is
    // under 4e-4), so the full run spends its budget on the step size
    let (n, dt_max, residual_tol) = if reduced {
        (256, 0.01, 5e-3)
    } else {
        (256, 0.0025, 1e-3)
    };
    if reduced {
        reduced_warning(&mut warnings, 5.0);
    }
    let settings = OdeSettings::default();
    let curve = mass_curve(10.0, &crate::selfsim::default_a_grid(), &settings)?;
    let pair: MassPair = curve
        .pairs
        .iter()
        .find(|p| p.mass > 8.0 * PI)
        .copied()
        .ok_or_else(|| crate::error::KsError::InvalidArgument(
            "no supercritical equal-mass pair found at tau = 10".into(),
        ))?;

    let grid = Grid2D::new(n, 28.0)?;
    let mut finals = Vec::new();
    let mut worst_residual = 0.0f64;
    let mut wrong_profile_residual = f64::INFINITY;
    let profiles = [
        integrate_profile(pair.a1, 10.0, &settings)?,
        integrate_profile(pair.a2, 10.0, &settings)?,
    ];
    for (i, profile) in profiles.iter().enumerate() {
        let state = profile_to_initial_state(profile, grid)?;
        let detector = BlowupDetector::defaults_for(&state)?;
        let ctrl = StepController::new(1e-3, 0.4, 1e-10, dt_max)?;
        let out = run_state(state, 4.0, ctrl, &[2.0, 3.0, 4.0], &detector)?;
        if out.verdict.status != RunStatus::Completed {
            return Ok(outcome(
                10,
                false,
                format!("run for a={:.3} ended {}", profile.a(), out.verdict.status),
                warnings,
            ));
        }
        let residual = evolution::self_similarity_residual(&out.snapshots, profile)?;
        worst_residual = worst_residual.max(residual);
        // negative control: the partner profile must NOT fit
        let other = &profiles[1 - i];
        wrong_profile_residual = wrong_profile_residual
            .min(evolution::self_similarity_residual(&out.snapshots, other)?);
        finals.push(out.final_state.u.clone());
    }
    let gap_field = field::combine(1.0, &finals[0], -1.0, &finals[1])?;
    let gap = lp_norm(&gap_field, 2.0)? / lp_norm(&finals[1], 2.0)?;

    let passed = worst_residual < residual_tol && gap > 0.05 && wrong_profile_residual > 0.1;
    Ok(outcome(
        10,
        passed,
        format!(
            "equal mass {:.4}: residuals <= {worst_residual:.2e} (tol {residual_tol:.0e}), mutual gap {gap:.3} (> 0.05), crossed-profile residual {wrong_profile_residual:.3} (> 0.1)",
            pair.mass
        ),
        warnings,
    ))
}

/// 11: the scalar caricature of the fixed-point argument: exact roots,
/// convergence to the small root, divergence above the large one.
fn quadratic_toy(_reduced: bool) -> Result<CriterionOutcome> {
    let toy = QuadraticToy::new(3.0 / 16.0, 1.0)?;
    let (small, large) = toy
        .roots()
        .ok_or_else(|| crate::error::KsError::InvalidArgument("discriminant negative".into()))?;
    let roots_ok = (small - 0.25).abs() < 1e-14 && (large - 0.75).abs() < 1e-14;
    let trace = toy.iterate(200);
    let limit = trace.last().copied().unwrap_or(f64::NAN);
    let converges = (limit - small).abs() < 1e-12;
    let runaway = toy.iterate_from(large + 1e-6, 400);
    let diverges = runaway.last().map_or(true, |&u| !u.is_finite() || u > 1e6);
    Ok(outcome(
        11,
        roots_ok && converges && diverges,
        format!(
            "roots ({small}, {large}), iteration from 0 reaches {limit:.15}, start above {large} diverges: {diverges}"
        ),
        Vec::new(),
    ))
}

/// 12: the defect of the converged solution against the initial point mass,
/// tested with a bump, decays with the composite rate of a sqrt(t) transport
/// bound over an epsilon mollification floor; two decades of t around the
/// crossover fit to the square-root exponent.
fn weak_attainment_rate(reduced: bool) -> Result<CriterionOutcome> {
    let mut warnings = Vec::new();
    let (n, l, eps, n_t, band) = if reduced {
        (128, 20.0, 0.32, 32, 0.15)
    } else {
        (256, 20.0, 0.2, 48, 0.10)
    };
    if reduced {
        reduced_warning(&mut warnings, 1.5);
    }
    let grid = Grid2D::new(n, l)?;
    let delta = eps * eps / 2.0;
    let horizon = 10.0 * delta;
    let mass = 1.0;
    let mut u0 = MollifiedMeasure::new();
    u0.push_atom(Atom {
        mass,
        x: 0.0,
        y: 0.0,
        width: eps,
    });
    let tgrid = TimeGrid::new(horizon, n_t, 2.0)?;
    let params = Params::new(1.0, 0.0)?;
    let (slab, report) = picard_solve(&u0, grid, tgrid, &params, 1.5, 1e-10, 40)?;
    if !report.converged {
        return Ok(outcome(12, false, "fixed point did not converge".into(), warnings));
    }

    let bump = TestFunction::Bump {
        center: (0.0, 0.0),
        radius: 6.0,
    };
    let samples = weak_attainment_probe(&slab, &u0, &[bump])?;
    let fit: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t >= delta / 10.0 && s.defect > 0.0)
        .map(|s| (s.t.ln(), s.defect.ln()))
        .collect();
    if fit.len() < 8 {
        return Ok(outcome(12, false, "too few nodes in the fit window".into(), warnings));
    }
    let slope = fit_slope(&fit);
    let decades = (fit.last().unwrap().0 - fit[0].0) / std::f64::consts::LN_10;

    // the bound mechanism: earliest defect under 10 |grad phi|_inf M (sqrt t + eps)
    let grad_sup = {
        let phi = SpectralField::from_values(grid, bump.sample(grid))?;
        field::gradient(&phi).sup_norm()
    };
    let first = samples
        .iter()
        .min_by(|a, b| a.t.total_cmp(&b.t))
        .expect("probe returned samples");
    let bound = 10.0 * grad_sup * mass * (first.t.sqrt() + eps);
    let bound_ok = first.defect < bound;

    let monotone = first.defect
        <= samples
            .iter()
            .max_by(|a, b| a.t.total_cmp(&b.t))
            .expect("probe returned samples")
            .defect;

    let slope_ok = (slope - 0.5).abs() <= band && decades >= 1.9;
    Ok(outcome(
        12,
        slope_ok && bound_ok && monotone,
        format!(
            "fitted exponent {slope:.3} over {decades:.1} decades (window [{:.1}, {:.1}] around 0.5), floor defect {:.2e} under bound {:.2e}",
            0.5 - band,
            0.5 + band,
            first.defect,
            bound
        ),
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_table_is_complete() {
        for id in 1..=CRITERION_COUNT {
            assert_ne!(criterion_name(id), "unknown");
        }
        assert_eq!(criterion_name(13), "unknown");
        let bogus = run_criterion(99, true);
        assert!(!bogus.passed);
    }

    #[test]
    fn quadratic_toy_criterion_passes() {
        let out = run_criterion(11, false);
        assert!(out.passed, "{}", out.summary_line());
    }

    #[test]
    fn beta_identity_criterion_passes_reduced() {
        let out = run_criterion(3, true);
        assert!(out.passed, "{}", out.summary_line());
        assert!(!out.warnings.is_empty());
    }
}
