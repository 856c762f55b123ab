//! The pose log written by `track`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use irtrack_core::PoseSource;

use crate::pipeline::PoseRecord;

pub const HEADER: &str = "timestamp_us,px,py,pz,qw,qx,qy,qz,source,frame_index";

fn source_name(s: PoseSource) -> &'static str {
    match s {
        PoseSource::Measured => "measured",
        PoseSource::Predicted => "predicted",
    }
}

/// Floats use the shortest representation that reads back exactly.
pub fn write_poses<W: Write>(out: &mut W, poses: &[PoseRecord]) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in poses {
        let [px, py, pz, qw, qx, qy, qz] = r.pose.to_array7();
        writeln!(
            out,
            "{},{px},{py},{pz},{qw},{qx},{qy},{qz},{},{}",
            r.timestamp_us,
            source_name(r.source),
            r.frame_index
        )?;
    }
    Ok(())
}

pub fn write_pose_csv(path: &Path, poses: &[PoseRecord]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_poses(&mut out, poses)?;
    out.flush()
}
