//! Error metrics, closed-form and sampled error analysis, the collision
//! lookup model and benchmarking helpers.

pub mod bench;
pub mod collision;
pub mod monte_carlo;
pub mod timing;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::esdf::EsdfVoxel;
use crate::layer::Layer;
use crate::tsdf::TsdfVoxel;
use crate::Point3;

pub use collision::{occupancy_lookup_count, trajectory_lookup_counts, LookupCounts, VoxelMeasure};
pub use monte_carlo::{monte_carlo_merged_error, MonteCarloConfig, MonteCarloResult, ObservationWeighting};

/// Summary of signed errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub rms: f64,
    /// Signed mean.
    pub mean: f64,
    /// Largest absolute error.
    pub max: f64,
    /// Number of samples with a known value.
    pub count: usize,
    /// Unknown samples over all samples; 0 when there are no samples.
    pub unknown_fraction: f64,
}

/// Running sums behind [`ErrorStats`]; mergeable across threads.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorAccumulator {
    count: usize,
    unknown: usize,
    sum: f64,
    sum_sq: f64,
    max_abs: f64,
}

impl ErrorAccumulator {
    pub fn add(&mut self, e: f64) {
        self.count += 1;
        self.sum += e;
        self.sum_sq += e * e;
        self.max_abs = self.max_abs.max(e.abs());
    }

    pub fn add_unknown(&mut self) {
        self.unknown += 1;
    }

    pub fn merge(mut self, o: Self) -> Self {
        self.count += o.count;
        self.unknown += o.unknown;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.max_abs = self.max_abs.max(o.max_abs);
        self
    }

    pub fn stats(&self) -> ErrorStats {
        let total = self.count + self.unknown;
        let n = self.count.max(1) as f64;
        ErrorStats {
            rms: (self.sum_sq / n).sqrt(),
            mean: self.sum / n,
            max: self.max_abs,
            count: self.count,
            unknown_fraction: if total == 0 {
                0.0
            } else {
                self.unknown as f64 / total as f64
            },
        }
    }
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64], unknown: usize) -> Self {
        let mut acc = ErrorAccumulator::default();
        errors.iter().for_each(|e| acc.add(*e));
        acc.unknown = unknown;
        acc.stats()
    }
}

/// Interpolated TSDF distance at each ground-truth surface point, clamped to
/// `±truncation`. Points whose interpolation cell is not fully observed are
/// counted as unknown.
pub fn surface_error(tsdf: &Layer<TsdfVoxel>, points: &[Point3], truncation: f64) -> ErrorStats {
    points
        .par_iter()
        .fold(ErrorAccumulator::default, |mut acc, p| {
            match tsdf.interpolate_distance(p) {
                Some(d) => acc.add(d.clamp(-truncation, truncation)),
                None => acc.add_unknown(),
            }
            acc
        })
        .reduce(ErrorAccumulator::default, ErrorAccumulator::merge)
        .stats()
}

/// `esdf − gt` over every observed ground-truth voxel that the ESDF has also
/// observed; ground-truth voxels the ESDF has not observed count as unknown.
pub fn esdf_error(esdf: &Layer<EsdfVoxel>, gt: &Layer<EsdfVoxel>) -> ErrorStats {
    gt.blocks()
        .par_iter()
        .map(|gb| {
            let mut acc = ErrorAccumulator::default();
            let eb = esdf.block(gb.index());
            for (i, g) in gb.voxels().iter().enumerate() {
                if !g.observed {
                    continue;
                }
                match eb.map(|b| b.voxels()[i]) {
                    Some(e) if e.observed => acc.add(e.distance as f64 - g.distance as f64),
                    _ => acc.add_unknown(),
                }
            }
            acc
        })
        .reduce(ErrorAccumulator::default, ErrorAccumulator::merge)
        .stats()
}

/// Smallest incidence angle considered in the projective-error analysis.
pub const MIN_INCIDENCE: f64 = PI / 20.0;

/// Error of a projective distance measured at incidence angle `theta` when
/// the true distance along the ray is `d`: `d·sin θ − d`.
pub fn projective_residual(theta: f64, d: f64) -> f64 {
    d * theta.sin() - d
}

/// Mean of [`projective_residual`] for `θ` uniform on `[π/20, π/2]`.
pub fn expected_projective_residual(d: f64) -> f64 {
    d * (MIN_INCIDENCE.cos() / (PI / 2.0 - MIN_INCIDENCE) - 1.0)
}

/// Error of the quasi-Euclidean distance for a direction at angle `phi` from
/// a grid axis, `d·(1 − sin(5π/8 − φ)/sin(3π/8))`.
pub fn quasi_euclidean_residual(phi: f64, d: f64) -> f64 {
    d * (1.0 - (5.0 * PI / 8.0 - phi).sin() / (3.0 * PI / 8.0).sin())
}

/// Mean of [`quasi_euclidean_residual`] for `φ` uniform on `[0, π/4]`.
pub fn expected_quasi_residual(d: f64) -> f64 {
    let a = 3.0 * PI / 8.0;
    d * (1.0 - (4.0 / PI) * 2.0 * a.cos() / a.sin())
}
