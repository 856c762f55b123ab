use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn irtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irtrack"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = irtrack(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    irtrack(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// One second of the default static scene.
fn simulate(dir: &Path) -> String {
    let scenario = dir.join("s.json");
    fs::write(
        &scenario,
        serde_json::json!({ "duration": 1.0, "seed": 4 }).to_string(),
    )
    .unwrap();
    let frames = dir.join("frames");
    ok(&["simulate", "--scenario", p(&scenario), "--out", p(&frames)]);
    frames.to_str().unwrap().to_owned()
}

#[test]
fn simulate_then_track_writes_the_pose_log() {
    let dir = tempfile::tempdir().unwrap();
    let frames = simulate(dir.path());
    let poses = dir.path().join("poses.csv");
    let model = format!("{frames}/rig.json");
    let intr = format!("{frames}/intrinsics.json");
    let report = ok(&[
        "track",
        "--frames",
        &frames,
        "--model",
        &model,
        "--intrinsics",
        &intr,
        "--out",
        p(&poses),
    ]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["frames"], 30);
    assert_eq!(report["tracked"], 30);

    let csv = fs::read_to_string(&poses).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("timestamp_us,px,py,pz,qw,qx,qy,qz,source,frame_index")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 10));
    assert_eq!(rows.iter().filter(|r| r[8] == "measured").count(), 30);
    assert!(rows.iter().any(|r| r[8] == "predicted"));

    // same inputs, same log
    let again = dir.path().join("again.csv");
    ok(&["track", "--frames", &frames, "--out", p(&again)]);
    assert_eq!(fs::read(&poses).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn exit_codes_separate_configuration_from_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let frames = simulate(dir.path());
    let out = dir.path().join("poses.csv");

    // bad configuration
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"frame_rate": -5}"#).unwrap();
    assert_eq!(
        code(&[
            "simulate",
            "--scenario",
            p(&bad),
            "--out",
            p(&dir.path().join("x"))
        ]),
        2
    );
    assert_eq!(
        code(&[
            "track",
            "--frames",
            p(&dir.path().join("missing")),
            "--out",
            p(&out)
        ]),
        2
    );
    assert_eq!(
        code(&[
            "track",
            "--frames",
            &frames,
            "--out",
            p(&out),
            "--workers",
            "0"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "refpipe", "--scene", "a.ply", "--chain", "b.json", "--joints", "0", "--seed", "1 2"
        ]),
        2
    );

    // malformed input
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ not json").unwrap();
    assert_eq!(
        code(&[
            "track",
            "--frames",
            &frames,
            "--model",
            p(&broken),
            "--out",
            p(&out)
        ]),
        3
    );
    fs::write(
        format!("{frames}/refl_000003.pgm"),
        b"P5\n448 450\n255\n\x00\x00",
    )
    .unwrap();
    assert_eq!(code(&["track", "--frames", &frames, "--out", p(&out)]), 3);
}

#[test]
fn cell_then_refpipe_recovers_the_base() {
    let dir = tempfile::tempdir().unwrap();
    let cell = dir.path().join("cell");
    ok(&["cell", "--seed", "3", "--out", p(&cell)]);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cell.join("cell.json")).unwrap()).unwrap();
    let nums = |v: &serde_json::Value| {
        v.as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect::<Vec<_>>()
    };
    let joints: Vec<String> = nums(&meta["joints"]).iter().map(f64::to_string).collect();
    let seed: Vec<String> = nums(&meta["seed"]).iter().map(f64::to_string).collect();
    let truth = nums(&meta["truth"]);
    let out = ok(&[
        "refpipe",
        "--scene",
        p(&cell.join("scene.ply")),
        "--chain",
        p(&cell.join("robot.json")),
        "--joints",
        &joints.join(","),
        "--seed",
        &seed.join(" "),
    ]);
    let result: serde_json::Value = serde_json::from_str(&out).unwrap();
    let t = nums(&result["transform"]);
    let dt =
        ((t[0] - truth[0]).powi(2) + (t[1] - truth[1]).powi(2) + (t[2] - truth[2]).powi(2)).sqrt();
    assert!(dt < 0.01, "{dt}");
    assert!(result["rms"].as_f64().unwrap() < 0.01);
}

#[test]
fn experiment_writes_statistics_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    fs::write(
        &scenario,
        serde_json::json!({ "calibration_frames": 100, "seed": 2 }).to_string(),
    )
    .unwrap();
    let stats = dir.path().join("stats.json");
    ok(&[
        "experiment",
        "static",
        "--scenario",
        p(&scenario),
        "--out",
        p(&stats),
        "--samples",
        "300",
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(report["stats"]["samples"], 300);
    let hist = fs::read_to_string(dir.path().join("stats_histogram.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 300);
}

#[test]
fn bench_reports_both_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let frames = simulate(dir.path());
    let out = ok(&["bench", "--frames", &frames, "--workers", "2"]);
    let r: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["runs"].as_array().unwrap().len(), 2);
    assert!(r["runs"][0]["fps"].as_f64().unwrap() > 0.0);
}
