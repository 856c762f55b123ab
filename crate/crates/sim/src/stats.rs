//! Error statistics and the normality check.

use irtrack_core::{RigidTransform, Vec3};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

pub const MIN_FIT_SAMPLES: usize = 30;
pub const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Middle value, or the mean of the two middle values for an even count.
pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    (!samples.is_empty()).then(|| samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Unbiased sample standard deviation.
pub fn sample_std(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let m = mean(samples)?;
    let ss: f64 = samples.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (samples.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub median: f64,
    pub sigma: f64,
}

pub fn gaussian_fit(samples: &[f64]) -> Result<GaussianFit, StatsError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    Ok(GaussianFit {
        median: median(samples).expect("non-empty"),
        sigma: sample_std(samples).expect("at least two samples"),
    })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Anderson–Darling test against a normal law with estimated mean and
/// variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityTest {
    pub samples: usize,
    /// A² statistic.
    pub statistic: f64,
    /// Critical value of A² at the requested significance.
    pub critical: f64,
    pub alpha: f64,
    pub rejected: bool,
}

/// Significance levels and critical values for the estimated-parameters
/// case (Stephens), before the small-sample correction.
const AD_CRITICAL: [(f64, f64); 5] = [
    (0.15, 0.576),
    (0.10, 0.656),
    (0.05, 0.787),
    (0.025, 0.918),
    (0.01, 1.092),
];

/// `alpha` must be one of 0.15, 0.10, 0.05, 0.025 or 0.01.
pub fn anderson_darling(samples: &[f64], alpha: f64) -> Result<NormalityTest, StatsError> {
    if samples.len() < 8 {
        return Err(StatsError::TooFewSamples {
            needed: 8,
            got: samples.len(),
        });
    }
    let level = AD_CRITICAL
        .iter()
        .find(|(a, _)| (a - alpha).abs() < 1e-12)
        .map(|&(_, c)| c)
        .unwrap_or_else(|| panic!("unsupported significance level {alpha}"));
    let n = samples.len() as f64;
    let m = mean(samples).expect("non-empty");
    let sd = sample_std(samples).expect("at least two samples");
    let mut z: Vec<f64> = samples.iter().map(|x| (x - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let len = z.len();
    let mut s = 0.0;
    for (i, zi) in z.iter().enumerate() {
        let lo = normal_cdf(*zi).ln();
        // upper tail via symmetry keeps precision for large z
        let hi = normal_cdf(-z[len - 1 - i]).ln();
        s += (2 * i + 1) as f64 * (lo + hi);
    }
    let statistic = -n - s / n;
    let critical = level / (1.0 + 4.0 / n - 25.0 / (n * n));
    Ok(NormalityTest {
        samples: len,
        statistic,
        critical,
        alpha,
        rejected: statistic > critical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Left edge and count of every bin.
    pub bins: Vec<(f64, usize)>,
}

impl Histogram {
    /// `bins` equal bins from 0 to the largest value (all non-negative).
    pub fn of_magnitudes(values: &[f64], bins: usize) -> Self {
        let top = values.iter().copied().fold(0.0, f64::max);
        let bin_width = if top > 0.0 { top / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins.max(1)];
        for v in values {
            let i = ((v / bin_width) as usize).min(counts.len() - 1);
            counts[i] += 1;
        }
        let bins = counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (i as f64 * bin_width, c))
            .collect();
        Self { bin_width, bins }
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.1).sum()
    }
}

/// Pose errors of tracked samples against ground truth. Position errors are
/// in millimetres and angles in degrees. Mean absolute errors use the
/// Euclidean length of each error; the Gaussian fits pool the signed x, y
/// and z components of position errors and of rotation-error vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub samples: usize,
    pub mean_abs_position: f64,
    pub mean_abs_angle: f64,
    /// Mean signed position error vector.
    pub mean_position_error: [f64; 3],
    pub position_fit: GaussianFit,
    pub angle_fit: GaussianFit,
    /// Counts of position error lengths.
    pub histogram: Histogram,
}

/// One sample's world-frame errors: position (m) and rotation vector (rad)
/// of `estimate` relative to `truth`.
pub fn pose_error(estimate: &RigidTransform, truth: &RigidTransform) -> (Vec3, Vec3) {
    let de = estimate.translation - truth.translation;
    let dr = (estimate.rotation * truth.rotation.inverse()).to_rotation_vector();
    (de, dr)
}

impl ErrorStats {
    /// `errors` holds position (m) and rotation-vector (rad) errors.
    pub fn from_errors(errors: &[(Vec3, Vec3)]) -> Result<Self, StatsError> {
        if errors.len() < MIN_FIT_SAMPLES {
            return Err(StatsError::TooFewSamples {
                needed: MIN_FIT_SAMPLES,
                got: errors.len(),
            });
        }
        let n = errors.len() as f64;
        let mm: Vec<Vec3> = errors.iter().map(|(p, _)| *p * 1e3).collect();
        let deg: Vec<Vec3> = errors
            .iter()
            .map(|(_, r)| *r * 180.0 / std::f64::consts::PI)
            .collect();
        let lengths: Vec<f64> = mm.iter().map(|v| v.norm()).collect();
        let sum = mm.iter().fold(Vec3::ZERO, |a, b| a + *b);
        let pooled = |vs: &[Vec3]| vs.iter().flat_map(|v| v.to_array()).collect::<Vec<f64>>();
        Ok(Self {
            samples: errors.len(),
            mean_abs_position: lengths.iter().sum::<f64>() / n,
            mean_abs_angle: deg.iter().map(|v| v.norm()).sum::<f64>() / n,
            mean_position_error: (sum * (1.0 / n)).to_array(),
            position_fit: gaussian_fit(&pooled(&mm))?,
            angle_fit: gaussian_fit(&pooled(&deg))?,
            histogram: Histogram::of_magnitudes(&lengths, HISTOGRAM_BINS),
        })
    }

    pub fn mean_position_error_norm(&self) -> f64 {
        let [x, y, z] = self.mean_position_error;
        (x * x + y * y + z * z).sqrt()
    }
}

/// Normality of position errors: every `stride`-th sample is kept so that
/// neighbouring samples are roughly independent, each axis is standardised
/// on its own, and the pooled values are tested.
pub fn position_normality(
    errors: &[(Vec3, Vec3)],
    stride: usize,
    alpha: f64,
) -> Result<NormalityTest, StatsError> {
    let kept: Vec<Vec3> = errors.iter().step_by(stride.max(1)).map(|e| e.0).collect();
    let mut pooled = Vec::with_capacity(kept.len() * 3);
    for axis in 0..3 {
        let xs: Vec<f64> = kept.iter().map(|v| v.to_array()[axis]).collect();
        let (Some(m), Some(sd)) = (mean(&xs), sample_std(&xs)) else {
            return Err(StatsError::TooFewSamples {
                needed: 2,
                got: xs.len(),
            });
        };
        if sd > 0.0 {
            pooled.extend(xs.iter().map(|x| (x - m) / sd));
        }
    }
    anderson_darling(&pooled, alpha)
}
