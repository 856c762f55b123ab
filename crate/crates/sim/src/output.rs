//! Files written by the simulator: frame directories, ground truth and
//! experiment statistics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use irtrack_core::io::{write_json, FrameDirectoryWriter, IoError, ModelFile};
use irtrack_core::{MarkerModel, RigidTransform};
use serde::{Deserialize, Serialize};

use crate::experiment::ExperimentReport;
use crate::scenario::{ScenarioConfig, Scene, SimError};
use crate::stats::Histogram;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const MODEL_FILE: &str = "rig.json";
pub const INTRINSICS_FILE: &str = "intrinsics.json";
pub const SCENARIO_FILE: &str = "scenario.json";

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `timestamp_us,px,py,pz,qw,qx,qy,qz` rows.
pub fn ground_truth_csv(rows: &[(u64, RigidTransform)]) -> String {
    let mut out = String::from("timestamp_us,px,py,pz,qw,qx,qy,qz\n");
    for (t, pose) in rows {
        let [px, py, pz, qw, qx, qy, qz] = pose.to_array7();
        let _ = writeln!(out, "{t},{px},{py},{pz},{qw},{qx},{qy},{qz}");
    }
    out
}

/// `bin_left_mm,count` rows.
pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_left_mm,count\n");
    for (left, count) in &h.bins {
        let _ = writeln!(out, "{left},{count}");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub frames: usize,
    pub out_of_frustum: usize,
}

/// Renders the whole scenario into `dir`: the frame directory, the ground
/// truth, and the rig, intrinsics and scenario files needed to track it.
pub fn simulate(config: &ScenarioConfig, dir: &Path) -> Result<SimulateSummary, OutputError> {
    let frames = config.frame_count();
    let scene = Scene::new(config, frames)?;
    let mut writer = FrameDirectoryWriter::create(dir)?;
    let mut truth = Vec::with_capacity(frames);
    let mut out_of_frustum = 0;
    for k in 0..frames {
        let f = scene.render(k);
        out_of_frustum += usize::from(f.out_of_frustum);
        writer.write(k as u64, &f.reflectivity, &f.depth)?;
        truth.push((f.reflectivity.timestamp_us, f.truth_rig));
    }
    writer.finish()?;
    write_text(&dir.join(GROUND_TRUTH_FILE), &ground_truth_csv(&truth))?;
    let model = MarkerModel::new(config.marker_rig.clone())
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    write_json(&dir.join(MODEL_FILE), &ModelFile::new(&model, None))?;
    write_json(&dir.join(INTRINSICS_FILE), &config.intrinsics)?;
    write_json(&dir.join(SCENARIO_FILE), config)?;
    Ok(SimulateSummary {
        frames,
        out_of_frustum,
    })
}

/// Writes the report as JSON to `path` and its histogram as CSV next to it
/// (`<stem>_histogram.csv`).
pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<(), IoError> {
    write_json(path, report)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("stats");
    write_text(
        &path.with_file_name(format!("{stem}_histogram.csv")),
        &histogram_csv(&report.stats.histogram),
    )
}
