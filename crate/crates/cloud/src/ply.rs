//! ASCII PLY with `x y z` vertex properties.

use std::fmt::Write as _;

use irtrack_core::Vec3;
use thiserror::Error;

use crate::cloud::PointCloud;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlyError {
    #[error("not an ASCII PLY file")]
    NotAsciiPly,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub fn write_ply(cloud: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in &cloud.points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

pub fn read_ply(text: &str) -> Result<PointCloud, PlyError> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(PlyError::NotAsciiPly);
    }
    let malformed = |line: usize, message: &str| PlyError::Malformed {
        line: line + 1,
        message: message.into(),
    };

    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    for (n, line) in lines.by_ref() {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                if words.next() != Some("ascii") {
                    return Err(PlyError::NotAsciiPly);
                }
            }
            Some("element") => {
                let name = words.next();
                let count = words.next().and_then(|c| c.parse::<usize>().ok());
                in_vertex = name == Some("vertex");
                if in_vertex {
                    vertex_count = Some(count.ok_or_else(|| malformed(n, "bad vertex count"))?);
                } else if vertex_count.is_none() {
                    return Err(malformed(n, "vertex element must come first"));
                }
            }
            Some("property") if in_vertex => {
                let name = words
                    .last()
                    .ok_or_else(|| malformed(n, "property without name"))?;
                props.push(name.to_owned());
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let count = vertex_count.ok_or_else(|| malformed(0, "no vertex element"))?;
    let index_of = |axis: &str| props.iter().position(|p| p == axis);
    let (Some(ix), Some(iy), Some(iz)) = (index_of("x"), index_of("y"), index_of("z")) else {
        return Err(malformed(0, "vertex needs x, y and z properties"));
    };

    let mut points = Vec::with_capacity(count);
    for (n, line) in lines {
        if points.len() == count {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| malformed(n, "non-numeric value"))?;
        if values.len() < props.len() {
            return Err(malformed(n, "too few values"));
        }
        let p = Vec3::new(values[ix], values[iy], values[iz]);
        if !p.is_finite() {
            return Err(malformed(n, "non-finite coordinate"));
        }
        points.push(p);
    }
    if points.len() != count {
        return Err(malformed(0, "fewer vertices than declared"));
    }
    Ok(PointCloud::new(points))
}
