//! Reflectivity and depth frames, undistortion, thresholding and blob
//! detection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RigidTransform, Vec3};

/// Reflectivity cutoff: marker pixels saturate close to 255.
pub const DEFAULT_THRESHOLD: u8 = 250;

/// Minimum blob area in half-resolution pixels.
pub const DEFAULT_MIN_BLOB_AREA: usize = 2;

/// Lower bound of the region-of-interest margin in pixels.
pub const MIN_ROI_MARGIN: f64 = 24.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("no previous blobs to predict a region of interest from")]
    EmptyHistory,
    #[error("buffer of {actual} values does not match {width}×{height}")]
    SizeMismatch {
        width: usize,
        height: usize,
        actual: usize,
    },
}

/// Pinhole intrinsics with Brown–Conrady distortion (two radial and two
/// tangential coefficients). Pixel `(i, j)` has its centre at `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length in pixels.
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub p1: f64,
    #[serde(default)]
    pub p2: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Distortion-free intrinsics with the principal point at `(cx, cy)`.
    pub fn pinhole(f: f64, cx: f64, cy: f64, width: usize, height: usize) -> Self {
        Self {
            f,
            cx,
            cy,
            k1: 0.0,
            k2: 0.0,
            p1: 0.0,
            p2: 0.0,
            width,
            height,
        }
    }

    /// 448×450 short-throw stream.
    pub fn short_throw() -> Self {
        Self::pinhole(500.0, 224.0, 225.0, 448, 450)
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        let bad = |msg: String| Err(FrameError::InvalidIntrinsics(msg));
        if !(self.f.is_finite() && self.f > 0.0) {
            return bad(format!("focal length {} must be positive", self.f));
        }
        if self.width == 0 || self.height == 0 {
            return bad("frame size must be non-zero".into());
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return bad(format!(
                "principal point ({}, {}) outside frame",
                self.cx, self.cy
            ));
        }
        if ![self.k1, self.k2, self.p1, self.p2]
            .iter()
            .all(|c| c.is_finite())
        {
            return bad("distortion coefficients must be finite".into());
        }
        Ok(())
    }

    pub fn has_distortion(&self) -> bool {
        self.k1 != 0.0 || self.k2 != 0.0 || self.p1 != 0.0 || self.p2 != 0.0
    }

    /// Forward lens model on normalized coordinates.
    pub fn distort_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        let xd = x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        (xd, yd)
    }

    /// Where an ideal (undistorted) pixel lands in the raw sensor image.
    pub fn distort_pixel(&self, u: f64, v: f64) -> (f64, f64) {
        let (xd, yd) = self.distort_normalized((u - self.cx) / self.f, (v - self.cy) / self.f);
        (xd * self.f + self.cx, yd * self.f + self.cy)
    }

    /// Inverse of [`CameraIntrinsics::distort_pixel`] by fixed-point iteration.
    pub fn undistort_pixel(&self, ud: f64, vd: f64) -> (f64, f64) {
        let xd = (ud - self.cx) / self.f;
        let yd = (vd - self.cy) / self.f;
        let (mut x, mut y) = (xd, yd);
        for _ in 0..50 {
            let (fx, fy) = self.distort_normalized(x, y);
            let (ex, ey) = (fx - xd, fy - yd);
            x -= ex;
            y -= ey;
            if ex.abs() < 1e-14 && ey.abs() < 1e-14 {
                break;
            }
        }
        (x * self.f + self.cx, y * self.f + self.cy)
    }

    /// Ideal pinhole projection of a camera-frame point.
    pub fn project(&self, p: Vec3) -> (f64, f64) {
        (self.f * p.x / p.z + self.cx, self.f * p.y / p.z + self.cy)
    }
}

/// 8-bit infra-red return intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub timestamp_us: u64,
    /// World ← camera at capture time, as reported by the headset.
    pub camera_pose: RigidTransform,
}

impl ReflectivityFrame {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        timestamp_us: u64,
        camera_pose: RigidTransform,
    ) -> Result<Self, FrameError> {
        if pixels.len() != width * height {
            return Err(FrameError::SizeMismatch {
                width,
                height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp_us,
            camera_pose,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Per-pixel planar depth in meters; `0` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub depths: Vec<f32>,
    pub timestamp_us: u64,
    pub camera_pose: RigidTransform,
}

impl DepthFrame {
    pub fn new(
        width: usize,
        height: usize,
        depths: Vec<f32>,
        timestamp_us: u64,
        camera_pose: RigidTransform,
    ) -> Result<Self, FrameError> {
        if depths.len() != width * height {
            return Err(FrameError::SizeMismatch {
                width,
                height,
                actual: depths.len(),
            });
        }
        Ok(Self {
            width,
            height,
            depths,
            timestamp_us,
            camera_pose,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.depths[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    /// Sub-pixel centroid in full-resolution undistorted coordinates.
    pub centroid_x: f64,
    pub centroid_y: f64,
    /// Member count at half resolution.
    pub area: usize,
}

/// Inclusive pixel bounds in full-resolution coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionOfInterest {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl RegionOfInterest {
    pub fn full_frame(width: usize, height: usize) -> Self {
        Self {
            x_min: 0,
            y_min: 0,
            x_max: width.saturating_sub(1),
            y_max: height.saturating_sub(1),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min as f64
            && x <= self.x_max as f64
            && y >= self.y_min as f64
            && y <= self.y_max as f64
    }

    pub fn area(&self) -> usize {
        (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    /// Index of the top-left source pixel; `u32::MAX` when outside the frame.
    index: u32,
    wx: f32,
    wy: f32,
}

/// Precomputed remap table from undistorted output pixels to bilinear taps
/// in the raw frame.
#[derive(Debug, Clone)]
pub struct Undistorter {
    intrinsics: CameraIntrinsics,
    taps: Vec<Tap>,
}

impl Undistorter {
    pub fn new(intrinsics: &CameraIntrinsics) -> Self {
        let (w, h) = (intrinsics.width, intrinsics.height);
        let mut taps = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let (sx, sy) = intrinsics.distort_pixel(u as f64, v as f64);
                let (x0, y0) = (sx.floor(), sy.floor());
                let inside = x0 >= 0.0 && y0 >= 0.0 && x0 <= (w - 1) as f64 && y0 <= (h - 1) as f64;
                taps.push(if inside {
                    Tap {
                        index: (y0 as usize * w + x0 as usize) as u32,
                        wx: (sx - x0) as f32,
                        wy: (sy - y0) as f32,
                    }
                } else {
                    Tap {
                        index: u32::MAX,
                        wx: 0.0,
                        wy: 0.0,
                    }
                });
            }
        }
        Self {
            intrinsics: *intrinsics,
            taps,
        }
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn apply(&self, frame: &ReflectivityFrame) -> ReflectivityFrame {
        if !self.intrinsics.has_distortion() {
            return frame.clone();
        }
        let w = frame.width;
        let last_x = w - 1;
        let last_y = frame.height - 1;
        let src = &frame.pixels;
        let pixels = self
            .taps
            .iter()
            .map(|tap| {
                if tap.index == u32::MAX {
                    return 0;
                }
                let i = tap.index as usize;
                let (x, y) = (i % w, i / w);
                let dx = usize::from(x < last_x);
                let dy = if y < last_y { w } else { 0 };
                let p00 = src[i] as f32;
                let p10 = src[i + dx] as f32;
                let p01 = src[i + dy] as f32;
                let p11 = src[i + dy + dx] as f32;
                let top = p00 + (p10 - p00) * tap.wx;
                let bottom = p01 + (p11 - p01) * tap.wx;
                (top + (bottom - top) * tap.wy).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        ReflectivityFrame {
            width: frame.width,
            height: frame.height,
            pixels,
            timestamp_us: frame.timestamp_us,
            camera_pose: frame.camera_pose,
        }
    }
}

/// Resamples a raw frame onto the ideal pinhole grid.
pub fn undistort(frame: &ReflectivityFrame, intrinsics: &CameraIntrinsics) -> ReflectivityFrame {
    Undistorter::new(intrinsics).apply(frame)
}

/// `mask[i] = pixels[i] > cutoff`.
pub fn threshold(frame: &ReflectivityFrame, cutoff: u8) -> Mask {
    Mask {
        width: frame.width,
        height: frame.height,
        bits: frame.pixels.iter().map(|p| *p > cutoff).collect(),
    }
}

/// OR-pools 2×2 blocks; output dimensions are `ceil(dim / 2)`.
pub fn downsample_half(mask: &Mask) -> Mask {
    let (w, h) = (mask.width.div_ceil(2), mask.height.div_ceil(2));
    let mut out = Mask::new(w, h);
    for y in 0..mask.height {
        let row = &mask.bits[y * mask.width..(y + 1) * mask.width];
        let out_row = &mut out.bits[(y / 2) * w..(y / 2 + 1) * w];
        for (x, on) in row.iter().enumerate() {
            if *on {
                out_row[x / 2] = true;
            }
        }
    }
    out
}

/// Connected components (4-connectivity) of `mask`, restricted to the
/// half-resolution window `[x0, x1] × [y0, y1]`, in raster order of their
/// first pixel.
fn components(mask: &Mask, x0: usize, y0: usize, x1: usize, y1: usize) -> Vec<Vec<(usize, usize)>> {
    let rw = x1 - x0 + 1;
    let rh = y1 - y0 + 1;
    let mut seen = vec![false; rw * rh];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let local = (y - y0) * rw + (x - x0);
            if seen[local] || !mask.get(x, y) {
                continue;
            }
            seen[local] = true;
            stack.push((x, y));
            let mut members = Vec::new();
            while let Some((cx, cy)) = stack.pop() {
                members.push((cx, cy));
                let mut visit = |nx: usize, ny: usize| {
                    let l = (ny - y0) * rw + (nx - x0);
                    if !seen[l] && mask.get(nx, ny) {
                        seen[l] = true;
                        stack.push((nx, ny));
                    }
                };
                if cx > x0 {
                    visit(cx - 1, cy);
                }
                if cx < x1 {
                    visit(cx + 1, cy);
                }
                if cy > y0 {
                    visit(cx, cy - 1);
                }
                if cy < y1 {
                    visit(cx, cy + 1);
                }
            }
            out.push(members);
        }
    }
    out
}

fn half_window(
    half: &Mask,
    roi: Option<&RegionOfInterest>,
) -> Option<(usize, usize, usize, usize)> {
    if half.width == 0 || half.height == 0 {
        return None;
    }
    let (mw, mh) = (half.width - 1, half.height - 1);
    match roi {
        None => Some((0, 0, mw, mh)),
        Some(r) => {
            let (x0, y0) = (r.x_min / 2, r.y_min / 2);
            let (x1, y1) = ((r.x_max / 2).min(mw), (r.y_max / 2).min(mh));
            (x0 <= x1 && y0 <= y1).then_some((x0, y0, x1, y1))
        }
    }
}

/// Blobs in a half-resolution mask. `roi` is in full-resolution pixels.
///
/// Centroids are the unweighted mean of member coordinates scaled by two.
pub fn detect_blobs(half: &Mask, roi: Option<&RegionOfInterest>, min_area: usize) -> Vec<Blob> {
    let Some((x0, y0, x1, y1)) = half_window(half, roi) else {
        return Vec::new();
    };
    components(half, x0, y0, x1, y1)
        .into_iter()
        .filter(|c| c.len() >= min_area)
        .map(|c| {
            let n = c.len() as f64;
            let (sx, sy) = c.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| {
                (sx + *x as f64, sy + *y as f64)
            });
            Blob {
                centroid_x: 2.0 * sx / n,
                centroid_y: 2.0 * sy / n,
                area: c.len(),
            }
        })
        .collect()
}

/// Like [`detect_blobs`], but each centroid is recomputed from the
/// full-resolution mask pixels covered by the blob's half-resolution members.
/// Removes the up-to-one-pixel bias of the ×2 rescale.
pub fn detect_blobs_refined(
    full: &Mask,
    half: &Mask,
    roi: Option<&RegionOfInterest>,
    min_area: usize,
) -> Vec<Blob> {
    let Some((x0, y0, x1, y1)) = half_window(half, roi) else {
        return Vec::new();
    };
    components(half, x0, y0, x1, y1)
        .into_iter()
        .filter(|c| c.len() >= min_area)
        .map(|c| {
            let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
            for (hx, hy) in &c {
                for fy in 2 * hy..(2 * hy + 2).min(full.height) {
                    for fx in 2 * hx..(2 * hx + 2).min(full.width) {
                        if full.get(fx, fy) {
                            sx += fx as f64;
                            sy += fy as f64;
                            n += 1;
                        }
                    }
                }
            }
            let n = n.max(1) as f64;
            Blob {
                centroid_x: sx / n,
                centroid_y: sy / n,
                area: c.len(),
            }
        })
        .collect()
}

/// Bounding box of the previous centroids grown by
/// `max(0.2 · diagonal, 24 px)` and clipped to the frame.
pub fn predict_roi(
    previous: &[Blob],
    width: usize,
    height: usize,
) -> Result<RegionOfInterest, FrameError> {
    let first = previous.first().ok_or(FrameError::EmptyHistory)?;
    let (mut min_x, mut max_x) = (first.centroid_x, first.centroid_x);
    let (mut min_y, mut max_y) = (first.centroid_y, first.centroid_y);
    for b in &previous[1..] {
        min_x = min_x.min(b.centroid_x);
        max_x = max_x.max(b.centroid_x);
        min_y = min_y.min(b.centroid_y);
        max_y = max_y.max(b.centroid_y);
    }
    let diagonal = (max_x - min_x).hypot(max_y - min_y);
    let margin = (0.2 * diagonal).max(MIN_ROI_MARGIN);
    let clip = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
    Ok(RegionOfInterest {
        x_min: clip((min_x - margin).floor(), width - 1),
        y_min: clip((min_y - margin).floor(), height - 1),
        x_max: clip((max_x + margin).ceil(), width - 1),
        y_max: clip((max_y + margin).ceil(), height - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(width: usize, height: usize, pixels: Vec<u8>) -> ReflectivityFrame {
        ReflectivityFrame::new(width, height, pixels, 0, RigidTransform::IDENTITY).unwrap()
    }

    fn mask_from(width: usize, height: usize, on: &[(usize, usize)]) -> Mask {
        let mut m = Mask::new(width, height);
        for (x, y) in on {
            m.set(*x, *y, true);
        }
        m
    }

    fn square(cx: usize, cy: usize, half: usize) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for y in cy - half..=cy + half {
            for x in cx - half..=cx + half {
                v.push((x, y));
            }
        }
        v
    }

    #[test]
    fn threshold_is_strict() {
        let f = frame(4, 1, vec![249, 250, 251, 255]);
        assert_eq!(
            threshold(&f, DEFAULT_THRESHOLD).bits,
            vec![false, false, true, true]
        );
        assert_eq!(threshold(&frame(3, 3, vec![0; 9]), 250).count(), 0);
        assert_eq!(threshold(&frame(3, 3, vec![255; 9]), 250).count(), 9);
    }

    #[test]
    fn or_pooling_exhaustive() {
        for bits in 0u8..16 {
            let m = Mask {
                width: 2,
                height: 2,
                bits: (0..4).map(|i| bits & (1 << i) != 0).collect(),
            };
            let half = downsample_half(&m);
            assert_eq!((half.width, half.height), (1, 1));
            assert_eq!(half.bits[0], bits != 0);
        }
        assert_eq!(downsample_half(&Mask::new(6, 4)).count(), 0);
        let ones = Mask {
            width: 4,
            height: 4,
            bits: vec![true; 16],
        };
        assert_eq!(downsample_half(&ones).bits, vec![true; 4]);
        let odd = downsample_half(&Mask::new(5, 3));
        assert_eq!((odd.width, odd.height), (3, 2));
    }

    #[test]
    fn single_square_blob() {
        let m = mask_from(32, 32, &square(10, 10, 1));
        let blobs = detect_blobs(&m, None, DEFAULT_MIN_BLOB_AREA);
        assert_eq!(
            blobs,
            vec![Blob {
                centroid_x: 20.0,
                centroid_y: 20.0,
                area: 9
            }]
        );
        assert!(detect_blobs(&Mask::new(8, 8), None, 2).is_empty());
    }

    #[test]
    fn separated_squares_and_small_blobs() {
        let mut on = square(5, 5, 1);
        on.extend(square(9, 5, 1)); // columns 4..6 and 8..10, column 7 empty
        on.push((20, 20)); // single pixel, below min area
        let m = mask_from(32, 32, &on);
        let blobs = detect_blobs(&m, None, DEFAULT_MIN_BLOB_AREA);
        assert_eq!(blobs.len(), 2);
        // diagonal neighbours are not 4-connected
        let diag = mask_from(8, 8, &[(1, 1), (2, 2), (3, 3), (3, 4)]);
        let blobs = detect_blobs(&diag, None, 1);
        assert_eq!(blobs.len(), 3);
    }

    #[test]
    fn roi_restricts_search() {
        let mut on = square(5, 5, 1);
        on.extend(square(40, 40, 1));
        let m = mask_from(64, 64, &on);
        let roi = RegionOfInterest {
            x_min: 0,
            y_min: 0,
            x_max: 30,
            y_max: 30,
        };
        let blobs = detect_blobs(&m, Some(&roi), 2);
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].centroid_x, 10.0);
    }

    #[test]
    fn refined_centroid_uses_full_resolution() {
        // full-res disc-like block covering x 95..=105, y 40..=44
        let mut full = Mask::new(128, 64);
        for y in 40..=44 {
            for x in 95..=105 {
                full.set(x, y, true);
            }
        }
        let half = downsample_half(&full);
        let coarse = detect_blobs(&half, None, 2);
        let fine = detect_blobs_refined(&full, &half, None, 2);
        assert_eq!(coarse.len(), 1);
        assert_eq!(fine.len(), 1);
        assert_eq!(coarse[0].centroid_x, 99.0);
        assert_eq!((fine[0].centroid_x, fine[0].centroid_y), (100.0, 42.0));
        assert_eq!(fine[0].area, coarse[0].area);
    }

    #[test]
    fn roi_examples() {
        let b = Blob {
            centroid_x: 100.0,
            centroid_y: 100.0,
            area: 4,
        };
        let roi = predict_roi(&[b], 448, 450).unwrap();
        assert_eq!(
            roi,
            RegionOfInterest {
                x_min: 76,
                y_min: 76,
                x_max: 124,
                y_max: 124
            }
        );
        assert_eq!(roi.x_max - roi.x_min, 48);

        let corners = [
            Blob {
                centroid_x: 0.0,
                centroid_y: 0.0,
                area: 4,
            },
            Blob {
                centroid_x: 447.0,
                centroid_y: 449.0,
                area: 4,
            },
        ];
        assert_eq!(
            predict_roi(&corners, 448, 450).unwrap(),
            RegionOfInterest::full_frame(448, 450)
        );
        assert_eq!(predict_roi(&[], 448, 450), Err(FrameError::EmptyHistory));

        let near_edge = Blob {
            centroid_x: 5.0,
            centroid_y: 440.0,
            area: 4,
        };
        let roi = predict_roi(&[near_edge], 448, 450).unwrap();
        assert_eq!((roi.x_min, roi.y_max), (0, 449));
    }

    #[test]
    fn undistort_without_coefficients_is_identity() {
        let intr = CameraIntrinsics::pinhole(100.0, 16.0, 12.0, 32, 24);
        let pixels: Vec<u8> = (0..32 * 24).map(|i| (i * 7 % 256) as u8).collect();
        let f = frame(32, 24, pixels);
        assert_eq!(undistort(&f, &intr), f);
    }

    #[test]
    fn principal_point_is_fixed() {
        let intr = CameraIntrinsics {
            k1: 0.2,
            k2: -0.05,
            p1: 0.01,
            p2: -0.02,
            ..CameraIntrinsics::pinhole(80.0, 20.0, 15.0, 41, 31)
        };
        let mut pixels = vec![0u8; 41 * 31];
        pixels[15 * 41 + 20] = 255;
        let out = undistort(&frame(41, 31, pixels), &intr);
        assert_eq!(out.get(20, 15), 255);
        assert_eq!(out.pixels.iter().filter(|p| **p > 0).count(), 1);
    }

    #[test]
    fn distort_undistort_pixel_round_trip() {
        let intr = CameraIntrinsics {
            k1: 0.1,
            k2: 0.02,
            p1: 0.003,
            p2: -0.002,
            ..CameraIntrinsics::short_throw()
        };
        for (u, v) in [(0.0, 0.0), (447.0, 449.0), (224.0, 225.0), (100.0, 300.0)] {
            let (ud, vd) = intr.distort_pixel(u, v);
            let (ru, rv) = intr.undistort_pixel(ud, vd);
            assert!((ru - u).abs() < 1e-9 && (rv - v).abs() < 1e-9);
        }
    }

    /// Renders bright discs at ideal positions into the raw (distorted) image
    /// using the forward model, undistorts, and checks the detected centroids
    /// against the ideal ones.
    #[test]
    fn undistortion_recovers_disc_positions() {
        let intr = CameraIntrinsics {
            k1: 0.1,
            ..CameraIntrinsics::short_throw()
        };
        let centres = [
            (224.0, 225.0),
            (120.0, 110.0),
            (330.0, 160.0),
            (150.0, 340.0),
            (320.0, 320.0),
        ];
        let radius = 6.0;
        let (w, h) = (intr.width, intr.height);
        let mut pixels = vec![20u8; w * h];
        for vd in 0..h {
            for ud in 0..w {
                // supersample each raw pixel 4×4 for a soft edge
                let mut cover = 0.0;
                for sy in 0..4 {
                    for sx in 0..4 {
                        let (u, v) = intr.undistort_pixel(
                            ud as f64 - 0.375 + 0.25 * sx as f64,
                            vd as f64 - 0.375 + 0.25 * sy as f64,
                        );
                        if centres
                            .iter()
                            .any(|(cx, cy)| (u - cx).hypot(v - cy) <= radius)
                        {
                            cover += 1.0 / 16.0;
                        }
                    }
                }
                if cover > 0.0 {
                    pixels[vd * w + ud] = (20.0f64 + cover * 235.0).round() as u8;
                }
            }
        }
        let out = undistort(&frame(w, h, pixels), &intr);
        let full = threshold(&out, 200);
        let half = downsample_half(&full);
        let blobs = detect_blobs_refined(&full, &half, None, 2);
        assert_eq!(blobs.len(), centres.len());
        for (cx, cy) in centres {
            let best = blobs
                .iter()
                .map(|b| (b.centroid_x - cx).hypot(b.centroid_y - cy))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.5, "centre ({cx}, {cy}) displaced by {best}");
        }
    }

    proptest! {
        #[test]
        fn full_frame_roi_matches_no_roi(seed in any::<u64>(), w in 4usize..60, h in 4usize..60) {
            let mut state = seed;
            let mut m = Mask::new(w, h);
            for b in m.bits.iter_mut() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *b = (state >> 61) == 0;
            }
            let roi = RegionOfInterest::full_frame(w * 2, h * 2);
            prop_assert_eq!(detect_blobs(&m, Some(&roi), 1), detect_blobs(&m, None, 1));
        }

        #[test]
        fn blob_count_translation_invariant(dx in 0usize..20, dy in 0usize..20) {
            let base: Vec<(usize, usize)> = [(3, 3), (10, 4), (6, 12)]
                .iter()
                .flat_map(|(x, y)| square(*x, *y, 1))
                .collect();
            let shifted: Vec<(usize, usize)> = base.iter().map(|(x, y)| (x + dx, y + dy)).collect();
            let a = detect_blobs(&mask_from(40, 40, &base), None, 2);
            let b = detect_blobs(&mask_from(40, 40, &shifted), None, 2);
            prop_assert_eq!(a.len(), b.len());
        }
    }
}
