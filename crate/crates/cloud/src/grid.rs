//! Uniform spatial hash grid for radius and nearest-neighbour queries.

use irtrack_core::Vec3;

/// Grids with more cells than this get coarser cells.
const MAX_CELLS: usize = 1 << 23;

type Cell = (i64, i64, i64);

/// Dense uniform grid over the cloud's bounding box. Point indices are stored
/// cell by cell (compressed rows), so a cell lookup is two array reads.
#[derive(Debug, Clone)]
pub struct SpatialGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    origin: Vec3,
    dims: (i64, i64, i64),
    starts: Vec<u32>,
    members: Vec<u32>,
}

impl<'a> SpatialGrid<'a> {
    /// Panics unless `cell_size` is positive.
    pub fn new(points: &'a [Vec3], cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let (lo, hi) = points.iter().fold(
            (
                Vec3::new(f64::MAX, f64::MAX, f64::MAX),
                Vec3::new(f64::MIN, f64::MIN, f64::MIN),
            ),
            |(lo, hi), p| {
                (
                    Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                    Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
                )
            },
        );
        let origin = if points.is_empty() { Vec3::ZERO } else { lo };
        let extent = if points.is_empty() {
            Vec3::ZERO
        } else {
            hi - lo
        };
        let mut cell = cell_size;
        let dims = loop {
            let d = |e: f64| (e / cell).floor() as i64 + 1;
            let dims = (d(extent.x), d(extent.y), d(extent.z));
            if (dims.0 as f64) * (dims.1 as f64) * (dims.2 as f64) <= MAX_CELLS as f64 {
                break dims;
            }
            cell *= 2.0;
        };
        let n_cells = (dims.0 * dims.1 * dims.2) as usize;
        let mut grid = Self {
            points,
            cell,
            origin,
            dims,
            starts: vec![0; n_cells + 1],
            members: Vec::new(),
        };
        let ids: Vec<usize> = points
            .iter()
            .map(|p| grid.flat(grid.cell_of(*p)).expect("inside bounds"))
            .collect();
        for &id in &ids {
            grid.starts[id + 1] += 1;
        }
        for i in 0..n_cells {
            grid.starts[i + 1] += grid.starts[i];
        }
        let mut fill = grid.starts.clone();
        grid.members = vec![0; points.len()];
        for (i, &id) in ids.iter().enumerate() {
            grid.members[fill[id] as usize] = i as u32;
            fill[id] += 1;
        }
        grid
    }

    pub fn points(&self) -> &'a [Vec3] {
        self.points
    }

    fn cell_of(&self, p: Vec3) -> Cell {
        let r = (p - self.origin) / self.cell;
        (r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64)
    }

    fn flat(&self, c: Cell) -> Option<usize> {
        let (nx, ny, nz) = self.dims;
        if c.0 < 0 || c.1 < 0 || c.2 < 0 || c.0 >= nx || c.1 >= ny || c.2 >= nz {
            return None;
        }
        Some(((c.2 * ny + c.1) * nx + c.0) as usize)
    }

    fn cell_members(&self, id: usize) -> &[u32] {
        &self.members[self.starts[id] as usize..self.starts[id + 1] as usize]
    }

    /// Calls `f(index, squared_distance)` for every point within `radius` of
    /// `q`, including a point at `q` itself.
    pub fn for_each_within(&self, q: Vec3, radius: f64, mut f: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let a = self.cell_of(q - Vec3::new(radius, radius, radius));
        let b = self.cell_of(q + Vec3::new(radius, radius, radius));
        let (nx, ny, nz) = self.dims;
        for z in a.2.max(0)..=b.2.min(nz - 1) {
            for y in a.1.max(0)..=b.1.min(ny - 1) {
                for x in a.0.max(0)..=b.0.min(nx - 1) {
                    let id = ((z * ny + y) * nx + x) as usize;
                    for &i in self.cell_members(id) {
                        let d2 = (self.points[i as usize] - q).norm_squared();
                        if d2 <= r2 {
                            f(i as usize, d2);
                        }
                    }
                }
            }
        }
    }

    pub fn within(&self, q: Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i, _| out.push(i));
        out
    }

    /// Nearest point to `q` as `(index, distance)`; ties go to the lower index.
    pub fn nearest(&self, q: Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let (nx, ny, nz) = self.dims;
        // clamp the start cell into the grid; shells then grow from there
        let raw = self.cell_of(q);
        let c = (
            raw.0.clamp(0, nx - 1),
            raw.1.clamp(0, ny - 1),
            raw.2.clamp(0, nz - 1),
        );
        let max_k = [c.0, nx - 1 - c.0, c.1, ny - 1 - c.1, c.2, nz - 1 - c.2]
            .into_iter()
            .max()
            .unwrap_or(0);
        let mut best: Option<(usize, f64)> = None;
        for k in 0..=max_k {
            if let Some((_, d2)) = best {
                // every unvisited point lies outside the block of cells c ± (k − 1)
                let gap = self.block_gap(q, c, k - 1);
                if gap * gap > d2 {
                    break;
                }
            }
            self.visit_shell(c, k, |i| {
                let d2 = (self.points[i] - q).norm_squared();
                if best.is_none_or(|(bi, bd)| d2 < bd || (d2 == bd && i < bi)) {
                    best = Some((i, d2));
                }
            });
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    /// Distance from `q` to the outside of the cell block `c ± k`, or zero if
    /// `q` is already outside it.
    fn block_gap(&self, q: Vec3, c: Cell, k: i64) -> f64 {
        let r = q - self.origin;
        let axis = |v: f64, ci: i64| {
            let lo = (ci - k) as f64 * self.cell;
            let hi = (ci + k + 1) as f64 * self.cell;
            (v - lo).min(hi - v)
        };
        axis(r.x, c.0)
            .min(axis(r.y, c.1))
            .min(axis(r.z, c.2))
            .max(0.0)
    }

    fn visit_shell(&self, c: Cell, k: i64, mut f: impl FnMut(usize)) {
        let (nx, ny, nz) = self.dims;
        let mut visit = |x: i64, y: i64, z: i64| {
            let id = ((z * ny + y) * nx + x) as usize;
            self.cell_members(id).iter().for_each(|&i| f(i as usize));
        };
        for z in (c.2 - k).max(0)..=(c.2 + k).min(nz - 1) {
            for y in (c.1 - k).max(0)..=(c.1 + k).min(ny - 1) {
                let on_face = (z - c.2).abs() == k || (y - c.1).abs() == k;
                if on_face {
                    for x in (c.0 - k).max(0)..=(c.0 + k).min(nx - 1) {
                        visit(x, y, z);
                    }
                } else {
                    // interior rows only touch the two capping cells
                    for x in [c.0 - k, c.0 + k] {
                        if (0..nx).contains(&x) {
                            visit(x, y, z);
                        }
                    }
                }
            }
        }
    }
}
