//! `ks selfsim`: radial self-similar profile sweeps.
//!
//! `--tau T` sweeps the shooting parameter over a log grid and writes the
//! mass curve with any equal-mass pairs found; `--trend "2,10,100"` writes
//! the maximal-mass trend with its plug-in lower bound; `--find-tau-star`
//! bisects for the smallest relaxation time whose mass curve is
//! non-monotone. Profiles named by `--profile A` export as two-column xi,U
//! and xi,V tables.

use std::path::Path;

use clap::Args;

use kslab::{find_tau_star, integrate_profile, m_tau_trend, mass_curve, OdeSettings};

use crate::errors::CliError;
use crate::manifest::RunManifest;
use crate::output;

#[derive(Debug, Args)]
pub struct SelfsimArgs {
    /// Relaxation time for the mass-curve sweep and profile exports.
    #[arg(long)]
    pub tau: Option<f64>,

    /// Sweep range for the shooting parameter (log-spaced).
    #[arg(long, default_value_t = 1e-3)]
    pub a_min: f64,
    #[arg(long, default_value_t = 1e3)]
    pub a_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,

    /// Maximal-mass trend over comma-separated relaxation times.
    #[arg(long, value_delimiter = ',')]
    pub trend: Vec<f64>,

    /// Export xi,U and xi,V tables for these shooting parameters.
    #[arg(long, value_delimiter = ',')]
    pub profile: Vec<f64>,

    /// Bisect for the non-monotonicity threshold on [lo, hi].
    #[arg(long)]
    pub find_tau_star: bool,
    #[arg(long, default_value_t = 0.5)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.8)]
    pub hi: f64,

    /// Companion gnuplot script next to the mass-curve CSV.
    #[arg(long)]
    pub gnuplot: bool,
}

pub fn run(args: &SelfsimArgs, out_flag: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let writes_files = args.tau.is_some() || !args.trend.is_empty();
    if !writes_files && !args.find_tau_star {
        return Err(CliError::Config(
            "nothing to do: pass --tau, --trend or --find-tau-star".into(),
        ));
    }
    if args.tau.is_none() && !args.profile.is_empty() {
        return Err(CliError::Config(
            "--profile needs --tau for the relaxation time".into(),
        ));
    }
    let settings = OdeSettings::default();

    if args.find_tau_star {
        let star = find_tau_star(args.lo, args.hi, &settings)?;
        println!(
            "tau_star = {star:.3} (bracket [{}, {}], bisected to width 0.01)",
            args.lo, args.hi
        );
        if !writes_files {
            return Ok(());
        }
    }

    let dir = output::resolve_dir(out_flag, None);
    output::ensure_dir(&dir)?;
    let mut manifest = RunManifest::new("selfsim", seed);

    if let Some(tau) = args.tau {
        if !(tau > 0.0) {
            return Err(CliError::Config(format!("--tau must be positive, got {tau}")));
        }
        if !(args.a_min > 0.0 && args.a_min < args.a_max && args.points >= 2) {
            return Err(CliError::Config(format!(
                "need 0 < a_min < a_max and at least 2 points, got ({}, {}, {})",
                args.a_min, args.a_max, args.points
            )));
        }
        manifest.flag("tau", tau);
        manifest.flag("a_min", args.a_min);
        manifest.flag("a_max", args.a_max);
        manifest.flag("points", args.points);

        let span = (args.a_max / args.a_min).ln();
        let a_grid: Vec<f64> = (0..args.points)
            .map(|i| args.a_min * (span * i as f64 / (args.points - 1) as f64).exp())
            .collect();
        let curve = mass_curve(tau, &a_grid, &settings)?;

        let path = dir.join("mass_curve.csv");
        output::write_csv(
            &path,
            "a,tau,M,V_infinity,residual_max",
            curve.samples.iter().filter(|s| s.error.is_none()).map(|s| {
                format!("{},{},{},{},{}", s.a, tau, s.mass, s.v_infinity, s.residual_max)
            }),
        )?;
        manifest.push_output(&path);
        let failed = curve.samples.iter().filter(|s| s.error.is_some()).count();
        if failed > 0 {
            eprintln!("warning: {failed} profile integrations failed and were left out");
        }
        println!(
            "tau = {tau}: m_tau = {:.6} over {} samples, {} equal-mass pairs",
            curve.m_tau,
            curve.samples.len(),
            curve.pairs.len()
        );
        for p in &curve.pairs {
            println!("  pair M = {:.6}: a = {:.6e} and {:.6e}", p.mass, p.a1, p.a2);
        }
        if args.gnuplot {
            let gp = dir.join("mass_curve.gp");
            output::write_gnuplot(
                &gp,
                "mass_curve.csv",
                "self-similar mass landscape",
                "a",
                "M",
                Some("x"),
                &[("1:3".into(), format!("tau = {tau}"))],
            )?;
            manifest.push_output(&gp);
        }

        for &a in &args.profile {
            let prof = integrate_profile(a, tau, &settings)?;
            let table = prof.sample_table(400);
            let upath = dir.join(format!("profile_a{a}_U.csv"));
            let vpath = dir.join(format!("profile_a{a}_V.csv"));
            output::write_csv(&upath, "xi,U", table.iter().map(|(x, u, _)| format!("{x},{u}")))?;
            output::write_csv(&vpath, "xi,V", table.iter().map(|(x, _, v)| format!("{x},{v}")))?;
            manifest.push_output(&upath);
            manifest.push_output(&vpath);
            println!("  profile a = {a}: M = {:.6}, residual {:.2e}", prof.mass(), prof.residual_max());
        }
    }

    if !args.trend.is_empty() {
        let trend = m_tau_trend(&args.trend, &settings)?;
        let path = dir.join("m_tau_trend.csv");
        output::write_csv(
            &path,
            "tau,m_tau,lower_bound",
            trend
                .iter()
                .map(|p| format!("{},{},{}", p.tau, p.m_tau, p.lower_bound)),
        )?;
        manifest.push_output(&path);
        manifest.flag(
            "trend",
            args.trend
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        println!(
            "m_tau trend over {} relaxation times, strictly increasing",
            trend.len()
        );
    }

    manifest.write(&dir)?;
    Ok(())
}
