#![allow(dead_code)]

use irtrack_core::{CameraIntrinsics, MarkerModel, RigidTransform};
use irtrack_runtime::FramePair;
use irtrack_sim::{ScenarioConfig, Scene};

pub struct Recording {
    pub model: MarkerModel,
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<FramePair>,
    pub truth: Vec<RigidTransform>,
}

pub fn record(config: &ScenarioConfig, n: usize) -> Recording {
    let scene = Scene::new(config, n).unwrap();
    let mut frames = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for k in 0..n {
        let r = scene.render(k);
        frames.push(FramePair {
            frame_index: k as u64,
            reflectivity: r.reflectivity,
            depth: r.depth,
        });
        truth.push(r.truth_rig);
    }
    Recording {
        model: config.marker_model().unwrap(),
        intrinsics: config.intrinsics,
        frames,
        truth,
    }
}

pub fn noiseless(n: usize) -> Recording {
    record(&ScenarioConfig::noiseless(3), n)
}

pub fn source(
    frames: &[FramePair],
) -> impl Iterator<Item = Result<FramePair, irtrack_core::io::IoError>> + Send + '_ {
    frames.iter().cloned().map(Ok)
}
