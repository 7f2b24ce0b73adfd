//! End-to-end tests of the command-line interface: output shape, byte
//! determinism, config-file precedence, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn jtcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jtcal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("jtcal-test-{}-{name}", std::process::id()));
    p
}

const SMALL: &[&str] = &[
    "calibrate",
    "--fading",
    "flat",
    "--subcarriers",
    "1",
    "--snr",
    "10",
    "--runs",
    "5",
    "--frames",
    "2",
];

#[test]
fn calibrate_emits_header_runs_and_trailers() {
    let text = stdout_of(&jtcal(SMALL));
    let lines: Vec<&str> = text.lines().collect();
    // Header, 5 runs x 2 rounds, 2 trailer rows.
    assert_eq!(lines.len(), 1 + 10 + 2);
    assert_eq!(
        lines[0],
        format!(
            "run,frame,estimate_rad,error_rad{}",
            (0..16).map(|i| format!(",votes_{i}")).collect::<String>()
        )
    );
    assert!(lines[1].starts_with("0,1,"));
    assert!(lines[11].starts_with("-1,0,"));
    assert!(lines[12].starts_with("-1,1,"));
}

#[test]
fn calibrate_is_byte_deterministic() {
    let a = jtcal(SMALL);
    let b = jtcal(SMALL);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn summary_flag_keeps_only_trailers() {
    let mut args = SMALL.to_vec();
    args.push("--summary");
    let text = stdout_of(&jtcal(&args));
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("-1,0,"));
}

#[test]
fn out_file_matches_stdout_bytes() {
    let path = temp_path("out.csv");
    let mut args = SMALL.to_vec();
    let path_str = path.to_str().unwrap().to_string();
    args.extend(["--out", &path_str]);
    let with_file = jtcal(&args);
    assert!(with_file.status.success());
    assert!(with_file.stdout.is_empty());
    let file_bytes = std::fs::read(&path).unwrap();
    std::fs::remove_file(&path).ok();
    let on_stdout = jtcal(SMALL);
    assert_eq!(file_bytes, on_stdout.stdout);
}

#[test]
fn config_file_applies_and_flags_override() {
    let path = temp_path("exp.conf");
    std::fs::write(
        &path,
        "# small experiment\nfading = flat\nsubcarriers = 1\nsnr = 10\nruns = 4\nframes = 1\n",
    )
    .unwrap();
    let path_str = path.to_str().unwrap().to_string();
    let from_config = stdout_of(&jtcal(&["calibrate", "--config", &path_str]));
    // Header + 4 runs x 1 round + 2 trailers.
    assert_eq!(from_config.lines().count(), 1 + 4 + 2);
    let overridden = stdout_of(&jtcal(&[
        "calibrate",
        "--config",
        &path_str,
        "--runs",
        "2",
        "--frames",
        "3",
    ]));
    std::fs::remove_file(&path).ok();
    assert_eq!(overridden.lines().count(), 1 + 6 + 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let path = temp_path("bad.conf");
    std::fs::write(&path, "bandwidth = 20\n").unwrap();
    let out = jtcal(&["calibrate", "--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bandwidth"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = jtcal(&["calibrate", "--config", "/nonexistent/jtcal.conf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_ports_exit_2() {
    let out = jtcal(&["calibrate", "--ports", "3", "--runs", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ports"));
}

#[test]
fn invalid_phase_exit_2() {
    let out = jtcal(&["calibrate", "--phase", "3/0pi", "--runs", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_exit_2() {
    let out = jtcal(&["calibrate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_axis_exit_2() {
    let out = jtcal(&["sweep", "--axis", "bandwidth", "--values", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let out = jtcal(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("calibrate"));
}

#[test]
fn unwritable_output_exit_3() {
    let out = jtcal(&[
        "calibrate",
        "--runs",
        "1",
        "--fading",
        "flat",
        "--subcarriers",
        "1",
        "--out",
        "/nonexistent-dir/jtcal.csv",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_emits_trailers_per_value() {
    let text = stdout_of(&jtcal(&[
        "sweep",
        "--fading",
        "flat",
        "--subcarriers",
        "1",
        "--snr",
        "10",
        "--runs",
        "3",
        "--axis",
        "period",
        "--values",
        "1,2",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[0].starts_with("axis,value,run,frame,"));
    assert!(lines[1].starts_with("period,1,-1,0,"));
    assert!(lines[2].starts_with("period,1,-1,1,"));
    assert!(lines[3].starts_with("period,2,-1,0,"));
}

#[test]
fn sweep_phase_axis_accepts_pi_grammar() {
    let text = stdout_of(&jtcal(&[
        "sweep",
        "--fading",
        "flat",
        "--subcarriers",
        "1",
        "--runs",
        "2",
        "--axis",
        "phase",
        "--values",
        "0,6/8pi",
    ]));
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn linkgain_emits_fixed_and_uniform_rows() {
    let text = stdout_of(&jtcal(&[
        "linkgain",
        "--channel",
        "unit",
        "--draws",
        "16",
        "--phases",
        "0,4/8pi,pi",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert_eq!(lines[0], "case,phase_rad,mean_rx_power,gain_db");
    assert!(lines[1].starts_with("fixed,0,"));
    assert!(
        lines[1].ends_with(",0"),
        "zero error is the reference: {}",
        lines[1]
    );
    assert!(lines[4].starts_with("uniform,,"));
    // The half-turn row loses ~3 dB on a unit channel.
    let half_turn_db: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!((half_turn_db + 3.0103).abs() < 0.01, "{half_turn_db}");
}

#[test]
fn linkgain_is_byte_deterministic() {
    let args = ["linkgain", "--draws", "64", "--seed", "7"];
    let a = jtcal(&args);
    let b = jtcal(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
