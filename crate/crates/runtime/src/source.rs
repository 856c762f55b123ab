//! Frame sources for the pipeline.

use irtrack_core::io::{FrameDirectory, IoError};

use crate::pipeline::FramePair;

/// Streams a frame directory in index order, decoding each pair on demand.
pub fn directory_frames(
    dir: &FrameDirectory,
) -> impl Iterator<Item = Result<FramePair, IoError>> + Send + '_ {
    dir.entries().iter().enumerate().map(move |(i, e)| {
        let (reflectivity, depth) = dir.load(i)?;
        Ok(FramePair {
            frame_index: e.frame_index,
            reflectivity,
            depth,
        })
    })
}

/// Decodes the whole directory up front.
pub fn load_all(dir: &FrameDirectory) -> Result<Vec<FramePair>, IoError> {
    directory_frames(dir).collect()
}
