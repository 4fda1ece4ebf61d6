//! Black-box tests of the `sense-avoid` binary: exit-code contract,
//! artifact formats and the frame-dump round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sense_avoid::radar_model::{read_frame, write_frame, RadarConfig};

fn scenario_path(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(file)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sense-avoid"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn run_reaches_goal_with_exit_zero_and_writes_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--scenario",
        scenario_path("one_pole.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    for file in [
        "trial_summary.json",
        "trial_truth.csv",
        "trial_detections.csv",
        "trial_tracks.csv",
        "trial_commands.csv",
    ] {
        assert!(dir.path().join(file).exists(), "missing {file}");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json: serde_json::Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert_eq!(json["outcome"], "reached_goal");
}

#[test]
fn collision_scenario_exits_two() {
    // Control experiment: avoidance disabled on a pole dead ahead.
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("blind.toml");
    fs::write(
        &scenario,
        r#"
[world]
obstacles = [[0.0, 0.0, 0.25]]
start = [-5.0, 0.0]
goal = [5.0, 0.0]

[avoidance]
enabled = false
"#,
    )
    .unwrap();
    let out = run(&[
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--scenario",
        "/nonexistent/scenario.toml",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(64), "{out:?}");
}

#[test]
fn unknown_stage_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "dump",
        "--scenario",
        scenario_path("one_pole.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--stage",
        "spectrogram",
    ]);
    assert_eq!(out.status.code(), Some(64), "{out:?}");
}

#[test]
fn dumped_frame_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "dump",
        "--scenario",
        scenario_path("one_pole.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--stage",
        "frame",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let original = fs::read(dir.path().join("frame.bin")).unwrap();
    let frame = read_frame(&original[..]).unwrap();
    let mut rewritten = Vec::new();
    write_frame(&frame, &mut rewritten).unwrap();
    assert_eq!(original, rewritten);
}

#[test]
fn rdmap_dump_has_one_row_per_doppler_bin() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "dump",
        "--scenario",
        scenario_path("one_pole.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--stage",
        "rdmap",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = fs::read_to_string(dir.path().join("rdmap.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    let config = RadarConfig::default();
    assert_eq!(rows.len(), config.chirps_per_frame); // Doppler zero-pad factor is 1
    for row in rows {
        for cell in row.split(',') {
            cell.parse::<f64>().expect("numeric cell");
        }
    }
}

#[test]
fn sweep_reports_positive_slopes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--scenario",
        scenario_path("error_sweep.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json: serde_json::Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert!(json["range_slope"].as_f64().unwrap() > 0.0);
    assert!(json["bearing_slope"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}
