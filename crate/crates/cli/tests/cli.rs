use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SHORT: [&str; 6] = [
    "--override",
    "integration.dt_periods=0.0078125",
    "--override",
    "integration.t_transient_periods=20",
    "--override",
    "integration.t_record_periods=64",
];

fn magcomb(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magcomb"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn short(cmd: &str, extra: &[&str], out: &Path) -> Output {
    let mut args = vec![cmd];
    args.extend_from_slice(&SHORT);
    for e in extra {
        args.push("--override");
        args.push(e);
    }
    magcomb(&args, out)
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "status {:?}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|_| panic!("stderr not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn help_lists_defaults_and_units() {
    let o = Command::new(env!("CARGO_BIN_EXE_magcomb"))
        .arg("--help")
        .output()
        .unwrap();
    ok(&o);
    let text = String::from_utf8(o.stdout).unwrap();
    for needle in [
        "params.kappa_m_hz",
        "params.j_am_over_omega_b",
        "integration.dt_periods",
        "_rad_per_s",
        "Exit codes",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_magcomb"))
        .args(["sweep", "--help"])
        .output()
        .unwrap();
    assert!(String::from_utf8(o.stdout).unwrap().contains("sweep.grid_over_omega_b"));
}

#[test]
fn simulate_writes_power_of_two_samples() {
    let dir = tempfile::tempdir().unwrap();
    ok(&short("simulate", &[], dir.path()));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert_eq!(rows, 8192);
    assert!(csv.starts_with("t,re_a,im_a,re_m,im_m,re_b,im_b\n"));
    let meta = json(&dir.path().join("trajectory.json"));
    assert_eq!(meta["samples"], 8192);
    assert!(meta["low_lying_ratio"].as_f64().unwrap().is_finite());
    assert!(dir.path().join("config.resolved.json").exists());
}

#[test]
fn zero_drive_leaves_modes_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&short("simulate", &["params.drive_omega_rad_per_s=0"], dir.path()));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert!(
            line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0),
            "{line}"
        );
    }
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&short("simulate", &["params.j_am_over_omega_b=1.3"], a.path()));
    ok(&magcomb(
        &[
            "simulate",
            "--config",
            a.path().join("config.resolved.json").to_str().unwrap(),
        ],
        b.path(),
    ));
    for f in ["trajectory.csv", "trajectory.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn full_length_metadata_reproduces_on_rerun() {
    let runs: Vec<Value> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            ok(&magcomb(
                &["simulate", "--override", "params.j_am_over_omega_b=1"],
                dir.path(),
            ));
            json(&dir.path().join("trajectory.json"))
        })
        .collect();
    assert_eq!(runs[0]["samples"], 1 << 21);
    assert!(runs[0]["steady_m2"].as_f64().unwrap() > 0.0);
    assert_eq!(
        runs[0]["steady_m2"].as_f64().unwrap().to_bits(),
        runs[1]["steady_m2"].as_f64().unwrap().to_bits()
    );
    assert_eq!(runs[0], runs[1]);
}

fn write_tone(path: &Path, n: usize, order: f64) {
    let dt = 2.0 * PI / 64.0;
    let mut s = String::from("t,re_a,im_a,re_m,im_m,re_b,im_b\n");
    for k in 0..n {
        let t = k as f64 * dt;
        let (im, re) = (order * t).sin_cos();
        s.push_str(&format!("{t:e},0,0,{re:e},{im:e},0,0\n"));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn tone_trajectory_has_one_tooth() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("tone.csv");
    write_tone(&traj, 4096, 3.0);
    ok(&magcomb(
        &["spectrum", "--trajectory", traj.to_str().unwrap()],
        dir.path(),
    ));
    let comb = json(&dir.path().join("comb.json"));
    assert_eq!(comb["line_count"], 1);
    assert_eq!(comb["teeth"][0]["order"], 3);
    let spec = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(spec.lines().count(), 4097);
}

#[test]
fn non_power_of_two_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("odd.csv");
    write_tone(&traj, 3000, 3.0);
    let o = magcomb(&["spectrum", "--trajectory", traj.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "usage");
    assert!(err["message"].as_str().unwrap().contains("truncate the record to 2^k"));
    assert!(dir.path().join("error.json").exists());
}

#[test]
fn comb_at_reference_coupling_reports_plateau_and_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    ok(&magcomb(
        &["spectrum", "--override", "params.j_am_over_omega_b=1.3"],
        dir.path(),
    ));
    let comb = json(&dir.path().join("comb.json"));
    assert!(comb["line_count"].as_u64().unwrap() >= 10);
    assert!(comb["plateau"]["first_order"].is_i64());
    assert!(comb["cutoff_order"].is_i64());
    assert!((comb["repetition_rate"].as_f64().unwrap() - 1.0).abs() < comb["bin_width"].as_f64().unwrap());
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args: Vec<&str> = vec!["sweep", "--grid", "0,1.3,2"];
    args.extend_from_slice(&SHORT);
    ok(&magcomb(&args, a.path()));
    args.extend_from_slice(&["--workers", "8"]);
    ok(&magcomb(&args, b.path()));
    let sa = fs::read(a.path().join("sweep.csv")).unwrap();
    assert_eq!(sa, fs::read(b.path().join("sweep.csv")).unwrap());
    assert_eq!(String::from_utf8(sa).unwrap().lines().count(), 4);
    assert_eq!(json(&b.path().join("sweep.json"))["workers"], 8);
}

#[test]
fn default_sweep_grows_the_comb() {
    let dir = tempfile::tempdir().unwrap();
    ok(&magcomb(&["sweep", "--override", "lyapunov.enabled=false"], dir.path()));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "line_count").unwrap();
    let counts: Vec<u64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts.len(), 7);
    assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
    let contour = fs::read_to_string(dir.path().join("contour.csv")).unwrap();
    assert_eq!(contour.lines().count(), 8);
    let manifest = json(&dir.path().join("sweep.json"));
    assert_eq!(manifest["files"], serde_json::json!(["sweep.csv", "contour.csv"]));
}

#[test]
fn sweep_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<&str> = vec!["sweep", "--grid", "1.3"];
    args.extend_from_slice(&SHORT);
    ok(&magcomb(&args, dir.path()));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("1.3,"));
}

#[test]
fn lyapunov_of_damped_phonon() {
    let dir = tempfile::tempdir().unwrap();
    ok(&short(
        "lyapunov",
        &[
            "params.drive_omega_rad_per_s=0",
            "params.j_am_over_omega_b=0",
            "params.kappa_b_over_omega_b=0.01",
            "lyapunov.intervals=400",
        ],
        dir.path(),
    ));
    let l = json(&dir.path().join("lyapunov.json"));
    let lambda = l["lambda_max_over_omega_b"].as_f64().unwrap();
    assert!((lambda + 0.01).abs() < 1e-3, "{lambda}");
    assert_eq!(l["history"].as_array().unwrap().len(), 400);
}

#[test]
fn lyapunov_of_stable_comb_is_not_positive() {
    let dir = tempfile::tempdir().unwrap();
    ok(&short(
        "lyapunov",
        &["params.j_am_over_omega_b=0.5", "lyapunov.intervals=256"],
        dir.path(),
    ));
    let l = json(&dir.path().join("lyapunov.json"));
    let lambda = l["lambda_max_over_omega_b"].as_f64().unwrap();
    let res = l["resolution_over_omega_b"].as_f64().unwrap();
    assert!(lambda < 2.0 * res, "{lambda} vs resolution {res}");
}

#[test]
fn unknown_key_exits_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = short("simulate", &["params.kappa_q_hz=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["exit_code"], 2);
}

#[test]
fn bad_cli_flag_exits_with_usage() {
    let o = Command::new(env!("CARGO_BIN_EXE_magcomb"))
        .args(["simulate", "--bogus"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = short("simulate", &["params.j_am_over_omega_b=60"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&dir.path().join("error.json"))["error"], "divergence");
}

#[test]
fn diverging_lyapunov_fiducial_reports_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = short(
        "lyapunov",
        &["params.j_am_over_omega_b=60", "integration.t_transient_periods=0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "divergence");
    assert!(dir.path().join("error.json").exists());
}

#[test]
fn missing_input_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = magcomb(&["simulate", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"], "io");
    let o = magcomb(&["spectrum", "--trajectory", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(4));
}
