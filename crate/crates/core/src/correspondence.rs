//! Marker identification by pairwise-distance consistency against a known rig.
//!
//! Two distances agree when `|d_R − d_M| < δ`. An assignment maps detections
//! injectively onto model markers so that every pair of matched detections
//! agrees with its model pair. The largest assignment wins, then the smallest
//! residual.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

pub const DEFAULT_DELTA: f64 = 0.005;
pub const DEFAULT_MIN_MATCHED: usize = 3;

/// Residuals closer than this are indistinguishable.
pub const AMBIGUITY_TOLERANCE: f64 = 1e-9;

/// Model size limit imposed by the bitmask used during the search.
pub const MAX_MODEL_POINTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrespondenceError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("marker model has {0} points, more than the supported {MAX_MODEL_POINTS}")]
    ModelTooLarge(usize),
    #[error("invalid match configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("best consistent assignment matches {best} detections, fewer than {required}")]
    NoConsistentAssignment { best: usize, required: usize },
    #[error("{count} assignments of size {cardinality} share the minimal residual")]
    Ambiguous { cardinality: usize, count: usize },
}

/// Symmetric matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.d.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Off-diagonal entries of the upper triangle, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

pub fn distance_matrix(points: &[Vec3]) -> Result<DistanceMatrix, CorrespondenceError> {
    if points.len() < 2 {
        return Err(CorrespondenceError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = (points[i] - points[j]).norm();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix { n, d })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub delta: f64,
    pub min_matched: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            min_matched: DEFAULT_MIN_MATCHED,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), CorrespondenceError> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(CorrespondenceError::InvalidConfig("delta must be positive"));
        }
        if self.min_matched < 3 {
            return Err(CorrespondenceError::InvalidConfig(
                "min_matched must be at least 3",
            ));
        }
        Ok(())
    }
}

/// Rigid marker layout in the rig frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerModel {
    points: Vec<Vec3>,
    distances: DistanceMatrix,
}

impl MarkerModel {
    pub fn new(points: Vec<Vec3>) -> Result<Self, CorrespondenceError> {
        if points.len() < 3 {
            return Err(CorrespondenceError::TooFewPoints {
                needed: 3,
                got: points.len(),
            });
        }
        if points.len() > MAX_MODEL_POINTS {
            return Err(CorrespondenceError::ModelTooLarge(points.len()));
        }
        let distances = distance_matrix(&points)?;
        Ok(Self { points, distances })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distance_matrix(&self) -> &DistanceMatrix {
        &self.distances
    }

    /// Smallest gap between any two off-diagonal model distances.
    pub fn min_distance_gap(&self) -> f64 {
        let mut d = self.distances.upper_triangle();
        d.sort_by(f64::total_cmp);
        d.windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// True when all pairwise distances differ by more than `2δ`. Otherwise
    /// matching may be ambiguous; a warning is logged.
    pub fn check_distinct(&self, delta: f64) -> bool {
        let gap = self.min_distance_gap();
        let ok = gap > 2.0 * delta;
        if !ok {
            log::warn!(
                "marker model distances are only {:.2} mm apart, below 2δ = {:.2} mm; matching may be ambiguous",
                gap * 1e3,
                2.0 * delta * 1e3
            );
        }
        ok
    }
}

/// Matched `(detection_index, model_index)` pairs, sorted by detection index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<(usize, usize)>,
    /// Sum of `|d_R − d_M|` over all matched pairs of pairs, meters.
    pub residual: f64,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Splits the pairs into parallel `(detections, model)` point lists.
    pub fn gather(&self, detections: &[Vec3], model: &[Vec3]) -> (Vec<Vec3>, Vec<Vec3>) {
        self.pairs
            .iter()
            .map(|&(d, m)| (detections[d], model[m]))
            .unzip()
    }
}

struct Search<'a> {
    dr: &'a DistanceMatrix,
    dm: &'a DistanceMatrix,
    delta: f64,
    /// `candidates[p]`: model markers detection `p` may take.
    candidates: Vec<Vec<usize>>,
    assign: Vec<Option<usize>>,
    best_card: usize,
    best_res: f64,
    best: Vec<Option<usize>>,
    /// Residuals of the other assignments of best cardinality found so far
    /// that lie within tolerance of some best residual.
    ties: Vec<f64>,
}

impl Search<'_> {
    fn run(&mut self, p: usize, card: usize, res: f64, used: u64) {
        let remaining = self.dr.len() - p;
        if card + remaining < self.best_card {
            return;
        }
        if card + remaining == self.best_card && res > self.best_res + AMBIGUITY_TOLERANCE {
            return;
        }
        if p == self.dr.len() {
            self.record(card, res);
            return;
        }
        for k in 0..self.candidates[p].len() {
            let m = self.candidates[p][k];
            if used & (1 << m) != 0 {
                continue;
            }
            let Some(extra) = self.extension_cost(p, m) else {
                continue;
            };
            self.assign[p] = Some(m);
            self.run(p + 1, card + 1, res + extra, used | (1 << m));
            self.assign[p] = None;
        }
        self.run(p + 1, card, res, used);
    }

    /// Residual added by assigning detection `p` to model `m`, or `None` if
    /// some already matched pair disagrees.
    fn extension_cost(&self, p: usize, m: usize) -> Option<f64> {
        let mut cost = 0.0;
        for q in 0..p {
            if let Some(n) = self.assign[q] {
                let e = (self.dr.get(p, q) - self.dm.get(m, n)).abs();
                if !(e < self.delta) {
                    return None;
                }
                cost += e;
            }
        }
        Some(cost)
    }

    fn record(&mut self, card: usize, res: f64) {
        if card > self.best_card
            || (card == self.best_card && res < self.best_res - AMBIGUITY_TOLERANCE)
        {
            // strictly better: old ties are only kept if still within tolerance
            let keep_old = card == self.best_card;
            let old = self.best_res;
            self.ties
                .retain(|&t| keep_old && (t - res).abs() <= AMBIGUITY_TOLERANCE);
            if keep_old && (old - res).abs() <= AMBIGUITY_TOLERANCE {
                self.ties.push(old);
            }
            self.best_card = card;
            self.best_res = res;
            self.best.clone_from(&self.assign);
        } else if card == self.best_card && (res - self.best_res).abs() <= AMBIGUITY_TOLERANCE {
            if res < self.best_res {
                self.ties.push(self.best_res);
                self.best_res = res;
                self.best.clone_from(&self.assign);
            } else {
                self.ties.push(res);
            }
        }
    }
}

/// Finds the detection-to-model assignment with the most matched detections
/// and, among those, the smallest residual.
///
/// Exact branch and bound over detections: each detection takes an unused
/// model marker consistent with all earlier choices or stays unmatched.
/// Rejects the frame when two best assignments cannot be told apart.
pub fn match_markers(
    dr: &DistanceMatrix,
    dm: &DistanceMatrix,
    config: &MatchConfig,
) -> Result<CorrespondenceSet, CorrespondenceError> {
    config.validate()?;
    if dm.len() > MAX_MODEL_POINTS {
        return Err(CorrespondenceError::ModelTooLarge(dm.len()));
    }
    if dr.len() < config.min_matched {
        return Err(CorrespondenceError::NoConsistentAssignment {
            best: 0,
            required: config.min_matched,
        });
    }

    // A detection can only take a model marker if each of its distances to
    // other detections has some counterpart among that marker's distances.
    let candidates = (0..dr.len())
        .map(|p| {
            (0..dm.len())
                .filter(|&m| {
                    let support = (0..dr.len())
                        .filter(|&q| q != p)
                        .filter(|&q| {
                            (0..dm.len()).any(|n| {
                                n != m && (dr.get(p, q) - dm.get(m, n)).abs() < config.delta
                            })
                        })
                        .count();
                    support + 1 >= config.min_matched
                })
                .collect()
        })
        .collect();

    let mut search = Search {
        dr,
        dm,
        delta: config.delta,
        candidates,
        assign: vec![None; dr.len()],
        best_card: 0,
        best_res: f64::INFINITY,
        best: vec![None; dr.len()],
        ties: Vec::new(),
    };
    search.run(0, 0, 0.0, 0);

    if search.best_card < config.min_matched {
        return Err(CorrespondenceError::NoConsistentAssignment {
            best: search.best_card,
            required: config.min_matched,
        });
    }
    if !search.ties.is_empty() {
        return Err(CorrespondenceError::Ambiguous {
            cardinality: search.best_card,
            count: search.ties.len() + 1,
        });
    }
    let pairs = search
        .best
        .iter()
        .enumerate()
        .filter_map(|(d, m)| m.map(|m| (d, m)))
        .collect();
    Ok(CorrespondenceSet {
        pairs,
        residual: search.best_res,
    })
}

/// Matches detected points against a model.
pub fn match_points(
    detections: &[Vec3],
    model: &MarkerModel,
    config: &MatchConfig,
) -> Result<CorrespondenceSet, CorrespondenceError> {
    if detections.len() < 2 {
        config.validate()?;
        return Err(CorrespondenceError::NoConsistentAssignment {
            best: 0,
            required: config.min_matched,
        });
    }
    let dr = distance_matrix(detections)?;
    match_markers(&dr, model.distance_matrix(), config)
}
