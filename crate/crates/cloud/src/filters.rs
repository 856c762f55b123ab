//! Density and noise filters applied to the mapped environment cloud.

use std::collections::HashMap;

use irtrack_core::svd::svd3;
use irtrack_core::{Mat3, Vec3};

use crate::cloud::PointCloud;
use crate::grid::SpatialGrid;

pub const DEFAULT_VOXEL_LEAF: f64 = 0.01;
pub const DEFAULT_OUTLIER_RADIUS: f64 = 0.05;
pub const DEFAULT_OUTLIER_MIN_NEIGHBORS: usize = 9;
pub const DEFAULT_MLS_RADIUS: f64 = 0.03;

/// Neighbourhoods smaller than this pass through the smoother unchanged.
pub const MLS_MIN_NEIGHBORS: usize = 5;

pub fn voxel_index(p: Vec3, leaf: f64) -> (i64, i64, i64) {
    (
        (p.x / leaf).floor() as i64,
        (p.y / leaf).floor() as i64,
        (p.z / leaf).floor() as i64,
    )
}

/// One centroid per occupied voxel, ordered by voxel index.
pub fn voxel_downsample(cloud: &PointCloud, leaf: f64) -> PointCloud {
    assert!(leaf > 0.0, "voxel leaf must be positive");
    let mut voxels: HashMap<(i64, i64, i64), (Vec3, usize)> = HashMap::new();
    for &p in &cloud.points {
        let e = voxels
            .entry(voxel_index(p, leaf))
            .or_insert((Vec3::ZERO, 0));
        e.0 += p;
        e.1 += 1;
    }
    let mut cells: Vec<_> = voxels.into_iter().collect();
    cells.sort_unstable_by_key(|(k, _)| *k);
    cells
        .into_iter()
        .map(|(_, (sum, n))| sum / n as f64)
        .collect()
}

/// Keeps points with at least `min_neighbors` other points within `radius`.
pub fn radius_outlier_removal(cloud: &PointCloud, radius: f64, min_neighbors: usize) -> PointCloud {
    let grid = SpatialGrid::new(&cloud.points, radius);
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|&(i, &p)| {
            let mut n = 0;
            grid.for_each_within(p, radius, |j, _| n += usize::from(j != i));
            n >= min_neighbors
        })
        .map(|(_, &p)| p)
        .collect()
}

/// Moving-least-squares projection of every point onto a local quadric
/// height field.
///
/// Neighbours within `radius` are weighted by `exp(−d²/h²)` with
/// `h = radius/3`. A weighted principal-component plane gives the local frame
/// and a weighted quadratic `h(x, y)` is fitted over it; the point moves to
/// the fitted surface above its own footprint.
pub fn mls_smooth(cloud: &PointCloud, radius: f64) -> PointCloud {
    assert!(radius > 0.0, "MLS radius must be positive");
    let grid = SpatialGrid::new(&cloud.points, radius);
    let h2 = (radius / 3.0).powi(2);
    let mut neighbors: Vec<(Vec3, f64)> = Vec::new();
    cloud
        .points
        .iter()
        .map(|&p| {
            neighbors.clear();
            grid.for_each_within(p, radius, |j, d2| {
                neighbors.push((cloud.points[j], (-d2 / h2).exp()))
            });
            if neighbors.len() < MLS_MIN_NEIGHBORS {
                return p;
            }
            mls_project(p, &neighbors, radius).unwrap_or(p)
        })
        .collect()
}

fn mls_project(p: Vec3, neighbors: &[(Vec3, f64)], radius: f64) -> Option<Vec3> {
    let wsum: f64 = neighbors.iter().map(|n| n.1).sum();
    if !(wsum > 0.0) {
        return None;
    }
    let c = neighbors
        .iter()
        .fold(Vec3::ZERO, |acc, (q, w)| acc + *q * *w)
        / wsum;
    let cov = neighbors.iter().fold(Mat3::ZERO, |acc, (q, w)| {
        acc + (*q - c).outer(*q - c).scale(*w)
    });
    let svd = svd3(&cov);
    let (u, v, n) = (svd.v.column(0), svd.v.column(1), svd.v.column(2));

    // local coordinates scaled by the radius keep the normal equations well
    // conditioned
    let local = |q: Vec3| {
        let d = q - c;
        (d.dot(u) / radius, d.dot(v) / radius, d.dot(n))
    };
    let mut ata = [[0.0f64; 6]; 6];
    let mut atb = [0.0f64; 6];
    for (q, w) in neighbors {
        let (x, y, h) = local(*q);
        let row = [1.0, x, y, x * x, x * y, y * y];
        for i in 0..6 {
            atb[i] += w * row[i] * h;
            for j in 0..6 {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    let (x, y, h0) = local(p);
    let height = match solve6(ata, atb) {
        Some(a) => a[0] + a[1] * x + a[2] * y + a[3] * x * x + a[4] * x * y + a[5] * y * y,
        // too few or degenerate footprints: project onto the plane instead
        None => 0.0,
    };
    let out = p + n * (height - h0);
    out.is_finite().then_some(out)
}

/// Gaussian elimination with partial pivoting; `None` when near singular.
#[allow(clippy::needless_range_loop)]
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..6 {
        let pivot = (col..6).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..6 {
            let f = a[row][col] / a[col][col];
            for k in col..6 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for row in (0..6).rev() {
        let s: f64 = (row + 1..6).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}
