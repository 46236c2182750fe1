//! End-to-end checks of the `ks` binary: exit codes, output files, manifest
//! completeness and determinism, driven through the real executable.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kslab::{gauss_kernel, suggest_tau, Grid2D, MollifiedMeasure};

fn ks(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ks"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

/// Repo-level example config, exercised directly so the shipped files stay
/// correct.
fn example_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

/// Directory contents (file names) minus the manifest itself.
fn data_files(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.toml")
        .collect()
}

fn manifest(dir: &Path) -> toml::Value {
    let text = fs::read_to_string(dir.join("manifest.toml")).unwrap();
    toml::from_str(&text).unwrap()
}

const SIMULATE_SMALL: &str = r#"
[grid]
n = 64
l = 20.0
[params]
tau = 10.0
gamma = 0.0
[init]
atoms = [{ mass = 12.566370614359172, x = 0.0, y = 0.0, width = 0.8 }]
[time]
t_end = 0.5
[solver]
mode = "evolution"
[output]
snapshots = [0.25, 0.5]
formats = ["csv", "ksf", "gnuplot"]
"#;

#[test]
fn simulate_reports_triple_norms_and_a_complete_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SIMULATE_SMALL);
    let dir = tmp.path().join("out");
    let out = ks(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("triple norms"), "{text}");
    assert!(text.contains("verdict: completed"), "{text}");

    let series = fs::read_to_string(dir.join("series.csv")).unwrap();
    assert!(series.starts_with("t,mass,l1,l2,linf,min_u,dt,tail_fraction"));
    assert!(fs::read_to_string(dir.join("series.gp")).unwrap().contains("plot"));

    // every data file is listed, and everything listed exists
    let m = manifest(&dir);
    let listed: BTreeSet<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed, data_files(&dir));
    assert_eq!(m["verdict"].as_str(), Some("completed"));
    assert!(listed.contains("snap_0.25.ksf") && listed.contains("final.ksf"));
}

#[test]
fn simulate_rejects_unknown_keys_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SIMULATE_SMALL.replace("t_end = 0.5", "t_end = 0.5\nt_fnal = 2.0"),
    );
    let out = ks(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("t_fnal"), "{}", stderr(&out));
}

#[test]
fn simulate_names_the_atom_outside_the_box() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SIMULATE_SMALL.replace("x = 0.0", "x = 30.0"));
    let out = ks(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("atom 0") && err.contains("outside"), "{err}");
}

#[test]
fn simulate_missing_background_file_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SIMULATE_SMALL.replace("[init]", "[init]\nbackground = \"nope.ksf\""),
    );
    let out = ks(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("does not exist"), "{}", stderr(&out));
}

#[test]
fn supercritical_config_exits_2_and_records_the_event_time() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = example_config("blowup.toml");
    let dir = tmp.path().join("out");
    let out = ks(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("blowup suspected"), "{}", stderr(&out));
    let m = manifest(&dir);
    assert_eq!(m["verdict"].as_str(), Some("blowup_suspected"));
    let t_event = m["t_event"].as_float().unwrap();
    assert!(t_event > 0.0 && t_event < 0.6, "t_event = {t_event}");
}

#[test]
fn picard_converges_and_checkpoints_a_readable_slab() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = example_config("picard_small_mass.toml");
    let dir = tmp.path().join("out");
    let out = ks(&["picard", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("contraction ratio"), "{}", stdout(&out));

    let report = fs::read_to_string(dir.join("picard_report.txt")).unwrap();
    assert!(report.contains("converged = true"), "{report}");

    let (slab, params) = kslab::read_slab_checkpoint(&dir.join("slab.index")).unwrap();
    assert_eq!(params.tau, 1.0);
    assert_eq!(slab.tgrid().len(), 32);

    let m = manifest(&dir);
    let listed: BTreeSet<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed, data_files(&dir));
}

#[test]
fn picard_below_the_suggested_tau_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
        [grid]
        n = 64
        l = 20.0
        [params]
        tau = 0.1
        gamma = 0.0
        [init]
        atoms = [{ mass = 50.0, x = 0.0, y = 0.0, width = 0.7 }]
        [time]
        t_end = 1.0
        n_t = 16
        [solver]
        mode = "picard"
        [output]
        "#,
    );
    // the configured relaxation time really does sit below the suggestion
    let suggested = suggest_tau(&MollifiedMeasure::atom(50.0, 0.7), 1.5, 4.0).unwrap();
    assert!(suggested > 0.1, "suggestion {suggested} not above the config");

    let out = ks(&["picard", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("retry with tau >="), "{}", stderr(&out));
}

#[test]
fn picard_empty_measure_converges_to_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
        [grid]
        n = 64
        l = 20.0
        [params]
        tau = 1.0
        [init]
        atoms = []
        [time]
        t_end = 1.0
        n_t = 8
        [solver]
        mode = "picard"
        [output]
        formats = ["csv"]
        "#,
    );
    let dir = tmp.path().join("out");
    let out = ks(&["picard", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("converged in 1 iterations"), "{text}");
    assert!(text.contains("triple norm (p = 1.5) 0"), "{text}");
}

#[test]
fn eta_rejects_inadmissible_exponents_naming_the_window() {
    let out = ks(&["eta", "--p", "1.2"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("outside the open window"), "{}", stderr(&out));
}

#[test]
fn eta_needs_at_least_three_relaxation_times() {
    let out = ks(&["eta", "--taus", "1,10"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("at least 3"), "{}", stderr(&out));
}

#[test]
fn eta_scan_writes_a_decreasing_envelope() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = ks(&["eta", "--taus", "1,4,16", "--n", "64", "--l", "15", "--out", dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("fitted slope -"), "{}", stdout(&out));

    let csv = fs::read_to_string(dir.join("eta.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tau,eta_measured"));
    let etas: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(etas.len(), 3);
    assert!(etas[0] > etas[1] && etas[1] > etas[2], "{etas:?}");
}

#[test]
fn selfsim_sweep_above_the_threshold_finds_equal_mass_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = ks(&[
        "selfsim", "--tau", "10", "--points", "60", "--profile", "0.5",
        "--gnuplot", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("pair M ="), "{}", stdout(&out));

    let csv = fs::read_to_string(dir.join("mass_curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,tau,M,V_infinity,residual_max"));
    let max_mass = lines
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(0.0f64, f64::max);
    assert!(max_mass > 8.0 * std::f64::consts::PI, "max M = {max_mass}");

    assert!(fs::read_to_string(dir.join("profile_a0.5_U.csv")).unwrap().starts_with("xi,U"));
    assert!(fs::read_to_string(dir.join("profile_a0.5_V.csv")).unwrap().starts_with("xi,V"));
    let m = manifest(&dir);
    let listed: BTreeSet<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed, data_files(&dir));
}

#[test]
fn selfsim_sweep_below_the_threshold_respects_the_ceiling() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = ks(&["selfsim", "--tau", "0.5", "--points", "60", "--out", dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(!stdout(&out).contains("pair M ="), "{}", stdout(&out));

    let csv = fs::read_to_string(dir.join("mass_curve.csv")).unwrap();
    let max_mass = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(0.0f64, f64::max);
    assert!(max_mass <= 8.0 * std::f64::consts::PI + 0.1, "max M = {max_mass}");
}

#[test]
fn selfsim_locates_the_monotonicity_threshold() {
    let out = ks(&["selfsim", "--find-tau-star"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let star: f64 = text
        .split("tau_star = ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(star > 0.55 && star < 0.75, "{text}");
}

#[test]
fn validate_subset_prints_a_table_and_exits_zero() {
    let out = ks(&["validate", "--criteria", "1,3,11"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("criterion").count(), 3, "{text}");
    assert!(text.contains("passed 3 of 3"), "{text}");
}

#[test]
fn validate_reduced_mode_announces_scaled_tolerances() {
    let out = ks(&["validate", "--reduced", "--criteria", "1"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("warning:"), "{}", stdout(&out));
}

#[test]
fn validate_rejects_unknown_criterion_numbers() {
    let out = ks(&["validate", "--criteria", "13"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("criterion 13"), "{}", stderr(&out));
}

#[test]
fn validate_names_a_corrupt_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = Grid2D::new(32, 10.0).unwrap();
    let u = gauss_kernel(grid, 1.0, (0.0, 0.0), 0.5).unwrap();
    let v = gauss_kernel(grid, 0.5, (0.0, 0.0), 0.5).unwrap();
    let good = tmp.path().join("good.ksf");
    let bad = tmp.path().join("bad.ksf");
    kslab::write_snapshot(&good, &u, &v, 1.0, 2.0, 0.0).unwrap();
    kslab::write_snapshot(&bad, &u, &v, 1.0, 2.0, 0.0).unwrap();

    // intact directory first
    let out = ks(&["validate", "--criteria", "11", "--snapshots", tmp.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("2 files intact"), "{}", stdout(&out));

    // truncate one file and rescan
    let len = fs::metadata(&bad).unwrap().len();
    let f = fs::OpenOptions::new().write(true).open(&bad).unwrap();
    f.set_len(len / 2).unwrap();
    drop(f);
    let out = ks(&["validate", "--criteria", "11", "--snapshots", tmp.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("bad.ksf") && err.contains("corrupt artifact"), "{err}");
}

#[test]
fn strict_sequential_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (d1, d2) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&d1, &d2] {
        let out = ks(&[
            "selfsim", "--tau", "2", "--points", "40", "--strict-sequential",
            "--out", d.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(
        fs::read(d1.join("mass_curve.csv")).unwrap(),
        fs::read(d2.join("mass_curve.csv")).unwrap()
    );
}

#[test]
fn out_dir_env_var_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ks"))
        .args(["selfsim", "--tau", "2", "--points", "10"])
        .env("KS_OUT_DIR", tmp.path())
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("mass_curve.csv").exists());
    assert!(tmp.path().join("manifest.toml").exists());
}

#[test]
fn flag_driven_commands_reject_a_config() {
    let out = ks(&["eta", "--config", "x.toml"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("flag-driven"), "{}", stderr(&out));
}
