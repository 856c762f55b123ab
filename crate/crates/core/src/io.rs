//! On-disk formats: binary PGM frames, the JSON-lines frame index, and JSON
//! marker model and intrinsics files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspondence::{MarkerModel, MatchConfig};
use crate::frame::{CameraIntrinsics, DepthFrame, ReflectivityFrame};
use crate::geometry::{RigidTransform, Vec3};

pub const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_owned(),
            source,
        }
    }

    fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.to_owned(),
            message: message.into(),
        }
    }

    /// True for malformed content, false for filesystem failures.
    pub fn is_format_error(&self) -> bool {
        matches!(self, IoError::Format { .. })
    }
}

/// A decoded binary PGM image.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    /// Row-major samples; 16-bit files are decoded big-endian.
    pub samples: Vec<u16>,
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm, String> {
    let mut pos = 0;
    if header_token(bytes, &mut pos) != Some(b"P5") {
        return Err("not a binary PGM (P5)".into());
    }
    let mut number = |what: &str| -> Result<usize, String> {
        header_token(bytes, &mut pos)
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format!("bad {what} in header"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let max_value = number("maxval")?;
    if max_value == 0 || max_value > 65535 {
        return Err(format!("maxval {max_value} out of range"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    let wide = max_value > 255;
    let need = if wide { 2 * n } else { n };
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < need {
        return Err(format!(
            "raster truncated: {} of {need} bytes",
            raster.len()
        ));
    }
    let samples = if wide {
        raster[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        raster[..n].iter().map(|&b| b as u16).collect()
    };
    Ok(Pgm {
        width,
        height,
        max_value: max_value as u16,
        samples,
    })
}

pub fn encode_pgm(pgm: &Pgm) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", pgm.width, pgm.height, pgm.max_value).into_bytes();
    if pgm.max_value > 255 {
        out.extend(pgm.samples.iter().flat_map(|s| s.to_be_bytes()));
    } else {
        out.extend(pgm.samples.iter().map(|&s| s as u8));
    }
    out
}

fn read_pgm(path: &Path) -> Result<Pgm, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_pgm(&bytes).map_err(|m| IoError::format(path, m))
}

pub fn write_reflectivity_pgm(path: &Path, frame: &ReflectivityFrame) -> Result<(), IoError> {
    let pgm = Pgm {
        width: frame.width,
        height: frame.height,
        max_value: 255,
        samples: frame.pixels.iter().map(|&p| p as u16).collect(),
    };
    fs::write(path, encode_pgm(&pgm)).map_err(|e| IoError::io(path, e))
}

/// Depth is stored in whole millimetres; out-of-range values become 0.
pub fn write_depth_pgm(path: &Path, frame: &DepthFrame) -> Result<(), IoError> {
    let to_mm = |d: f32| {
        let mm = (d as f64 * 1000.0).round();
        if mm > 0.0 && mm <= 65535.0 {
            mm as u16
        } else {
            0
        }
    };
    let pgm = Pgm {
        width: frame.width,
        height: frame.height,
        max_value: 65535,
        samples: frame.depths.iter().map(|&d| to_mm(d)).collect(),
    };
    fs::write(path, encode_pgm(&pgm)).map_err(|e| IoError::io(path, e))
}

pub fn read_reflectivity_pgm(
    path: &Path,
    timestamp_us: u64,
    camera_pose: RigidTransform,
) -> Result<ReflectivityFrame, IoError> {
    let pgm = read_pgm(path)?;
    if pgm.max_value > 255 {
        return Err(IoError::format(path, "reflectivity frame must be 8-bit"));
    }
    let pixels = pgm.samples.iter().map(|&s| s as u8).collect();
    ReflectivityFrame::new(pgm.width, pgm.height, pixels, timestamp_us, camera_pose)
        .map_err(|e| IoError::format(path, e.to_string()))
}

pub fn read_depth_pgm(
    path: &Path,
    timestamp_us: u64,
    camera_pose: RigidTransform,
) -> Result<DepthFrame, IoError> {
    let pgm = read_pgm(path)?;
    let depths = pgm.samples.iter().map(|&mm| mm as f32 / 1000.0).collect();
    DepthFrame::new(pgm.width, pgm.height, depths, timestamp_us, camera_pose)
        .map_err(|e| IoError::format(path, e.to_string()))
}

/// One line of `index.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub frame_index: u64,
    pub timestamp_us: u64,
    /// `[px, py, pz, qw, qx, qy, qz]`, world ← camera.
    pub camera_pose: RigidTransform,
    pub reflectivity: String,
    pub depth: String,
}

pub fn reflectivity_file_name(frame_index: u64) -> String {
    format!("refl_{frame_index:06}.pgm")
}

pub fn depth_file_name(frame_index: u64) -> String {
    format!("depth_{frame_index:06}.pgm")
}

pub fn read_index(path: &Path) -> Result<Vec<IndexEntry>, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: IndexEntry = serde_json::from_str(&line)
            .map_err(|e| IoError::format(path, format!("line {}: {e}", n + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Writes frames into a directory as PGM pairs plus `index.jsonl`.
pub struct FrameDirectoryWriter {
    dir: PathBuf,
    index: BufWriter<File>,
}

impl FrameDirectoryWriter {
    pub fn create(dir: &Path) -> Result<Self, IoError> {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
        let path = dir.join(INDEX_FILE);
        let index = BufWriter::new(File::create(&path).map_err(|e| IoError::io(&path, e))?);
        Ok(Self {
            dir: dir.to_owned(),
            index,
        })
    }

    pub fn write(
        &mut self,
        frame_index: u64,
        reflectivity: &ReflectivityFrame,
        depth: &DepthFrame,
    ) -> Result<(), IoError> {
        let entry = IndexEntry {
            frame_index,
            timestamp_us: reflectivity.timestamp_us,
            camera_pose: reflectivity.camera_pose,
            reflectivity: reflectivity_file_name(frame_index),
            depth: depth_file_name(frame_index),
        };
        write_reflectivity_pgm(&self.dir.join(&entry.reflectivity), reflectivity)?;
        write_depth_pgm(&self.dir.join(&entry.depth), depth)?;
        let line = serde_json::to_string(&entry).expect("index entries always serialize");
        let path = self.dir.join(INDEX_FILE);
        writeln!(self.index, "{line}").map_err(|e| IoError::io(&path, e))
    }

    pub fn finish(mut self) -> Result<(), IoError> {
        let path = self.dir.join(INDEX_FILE);
        self.index.flush().map_err(|e| IoError::io(&path, e))
    }
}

/// Lazily reads frame pairs listed in a directory's `index.jsonl`.
#[derive(Debug, Clone)]
pub struct FrameDirectory {
    dir: PathBuf,
    entries: Vec<IndexEntry>,
}

impl FrameDirectory {
    pub fn open(dir: &Path) -> Result<Self, IoError> {
        let entries = read_index(&dir.join(INDEX_FILE))?;
        Ok(Self {
            dir: dir.to_owned(),
            entries,
        })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(&self, i: usize) -> Result<(ReflectivityFrame, DepthFrame), IoError> {
        let e = &self.entries[i];
        let refl = read_reflectivity_pgm(
            &self.dir.join(&e.reflectivity),
            e.timestamp_us,
            e.camera_pose,
        )?;
        let depth = read_depth_pgm(&self.dir.join(&e.depth), e.timestamp_us, e.camera_pose)?;
        if (refl.width, refl.height) != (depth.width, depth.height) {
            return Err(IoError::format(
                &self.dir.join(&e.depth),
                "depth and reflectivity sizes differ",
            ));
        }
        Ok((refl, depth))
    }
}

/// Marker model file: rig-frame points in meters and an optional tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub points: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl ModelFile {
    pub fn new(model: &MarkerModel, delta: Option<f64>) -> Self {
        Self {
            points: model.points().to_vec(),
            delta,
        }
    }

    /// The model plus a match configuration with the file's tolerance applied.
    pub fn into_model(self, mut config: MatchConfig) -> Result<(MarkerModel, MatchConfig), String> {
        if let Some(delta) = self.delta {
            config.delta = delta;
        }
        config.validate().map_err(|e| e.to_string())?;
        let model = MarkerModel::new(self.points).map_err(|e| e.to_string())?;
        Ok((model, config))
    }
}

fn read_text(path: &Path) -> Result<String, IoError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| IoError::io(path, e))?;
    Ok(s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
}

pub fn read_model(path: &Path) -> Result<(MarkerModel, MatchConfig), IoError> {
    let file: ModelFile = read_json(path)?;
    file.into_model(MatchConfig::default())
        .map_err(|m| IoError::format(path, m))
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, IoError> {
    let intr: CameraIntrinsics = read_json(path)?;
    intr.validate()
        .map_err(|e| IoError::format(path, e.to_string()))?;
    Ok(intr)
}
