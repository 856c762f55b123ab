//! Throughput measurement on frames held in memory.

use irtrack_core::{CameraIntrinsics, MarkerModel};
use serde::Serialize;

use crate::pipeline::{FramePair, Pipeline, PipelineConfig, PipelineError};
use crate::report::RunReport;

#[derive(Debug, Clone, Serialize)]
pub struct BenchRun {
    pub workers: usize,
    pub fps: f64,
    pub tracked: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub frames: usize,
    pub passes: usize,
    /// One run per worker count, starting with a single worker.
    pub runs: Vec<BenchRun>,
    /// Fps of the largest worker count over single-worker fps.
    pub scaling: f64,
}

/// Runs the unpaced pipeline over `frames` once per pass.
pub fn run_once(
    model: &MarkerModel,
    intrinsics: &CameraIntrinsics,
    config: PipelineConfig,
    frames: &[FramePair],
    passes: usize,
) -> Result<RunReport, PipelineError> {
    let config = PipelineConfig {
        realtime: false,
        ..config
    };
    let pipeline = Pipeline::new(model.clone(), *intrinsics, config)?;
    let source = (0..passes).flat_map(|pass| {
        let offset = frames.last().map_or(0, |f| f.reflectivity.timestamp_us + 1) * pass as u64;
        frames.iter().map(move |f| {
            let mut f = f.clone();
            f.reflectivity.timestamp_us += offset;
            f.depth.timestamp_us += offset;
            Ok(f)
        })
    });
    Ok(pipeline.run(source)?.report)
}

/// Compares one computing worker against `workers`.
pub fn bench(
    model: &MarkerModel,
    intrinsics: &CameraIntrinsics,
    config: PipelineConfig,
    frames: &[FramePair],
    workers: usize,
    passes: usize,
) -> Result<BenchReport, PipelineError> {
    let mut counts = vec![1];
    if workers > 1 {
        counts.push(workers);
    }
    let mut runs = Vec::new();
    for w in counts {
        let report = run_once(
            model,
            intrinsics,
            PipelineConfig {
                computing_workers: w,
                ..config
            },
            frames,
            passes,
        )?;
        runs.push(BenchRun {
            workers: w,
            fps: report.fps,
            tracked: report.tracked,
            frames: report.frames,
        });
    }
    let scaling = runs.last().unwrap().fps / runs[0].fps;
    Ok(BenchReport {
        frames: frames.len(),
        passes,
        runs,
        scaling,
    })
}
