//! Truncated signed distance fusion.

mod integrator;
pub mod raycast;

pub use integrator::{IntegrationStats, TsdfIntegrator};

use crate::error::{Error, Result};
use crate::layer::{LayerKind, SdfVoxel, Voxel};
use crate::{Point3, Pose};

/// Voxels with weight at or below this are treated as unobserved.
pub const OBSERVED_WEIGHT_THRESHOLD: f32 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TsdfVoxel {
    pub distance: f32,
    pub weight: f32,
    pub color: [u8; 3],
}

impl TsdfVoxel {
    pub fn observed(&self) -> bool {
        self.weight > OBSERVED_WEIGHT_THRESHOLD
    }
}

impl SdfVoxel for TsdfVoxel {
    fn distance(&self) -> f32 {
        self.distance
    }
    fn is_observed(&self) -> bool {
        self.observed()
    }
}

impl Voxel for TsdfVoxel {
    const KIND: LayerKind = LayerKind::Tsdf;
    const ENCODED_LEN: usize = 12;

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.distance.to_le_bytes());
        out.extend_from_slice(&self.weight.to_le_bytes());
        out.extend_from_slice(&self.color);
        out.push(0);
    }

    fn decode(b: &[u8]) -> Self {
        Self {
            distance: f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            weight: f32::from_le_bytes([b[4], b[5], b[6], b[7]]),
            color: [b[8], b[9], b[10]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Constant,
    InverseSquare,
    InverseSquareDropoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeMode {
    SimpleRaycast,
    GroupedRaycast,
    GroupedAntiGrazing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsdfConfig {
    pub truncation: f64,
    pub dropoff_epsilon: f64,
    pub max_weight: f64,
    pub weight_mode: WeightMode,
    pub merge_mode: MergeMode,
    pub min_ray_length: f64,
    pub max_ray_length: f64,
}

impl TsdfConfig {
    /// Truncation 4v, drop-off v, quadratic weights with drop-off, grouped raycasting.
    pub fn for_voxel_size(voxel_size: f64) -> Self {
        Self {
            truncation: 4.0 * voxel_size,
            dropoff_epsilon: voxel_size,
            max_weight: 1e4,
            weight_mode: WeightMode::InverseSquareDropoff,
            merge_mode: MergeMode::GroupedRaycast,
            min_ray_length: 0.0,
            max_ray_length: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dropoff_epsilon > 0.0 && self.dropoff_epsilon < self.truncation) {
            return Err(Error::Config(format!(
                "need 0 < dropoff epsilon ({}) < truncation ({})",
                self.dropoff_epsilon, self.truncation
            )));
        }
        if !(self.min_ray_length >= 0.0 && self.min_ray_length < self.max_ray_length) {
            return Err(Error::Config(format!(
                "need 0 <= min ray length ({}) < max ray length ({})",
                self.min_ray_length, self.max_ray_length
            )));
        }
        if !(self.max_weight > 0.0) {
            return Err(Error::Config(format!(
                "max weight must be positive, got {}",
                self.max_weight
            )));
        }
        Ok(())
    }
}

/// Points in the sensor frame plus the sensor-to-world pose.
#[derive(Debug, Clone)]
pub struct Scan {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub pose: Pose,
}

impl Scan {
    pub fn new(points: Vec<Point3>, pose: Pose) -> Self {
        Self {
            points,
            colors: None,
            pose,
        }
    }

    pub fn with_colors(points: Vec<Point3>, colors: Vec<[u8; 3]>, pose: Pose) -> Result<Self> {
        if colors.len() != points.len() {
            return Err(Error::Config(format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        Ok(Self {
            points,
            colors: Some(colors),
            pose,
        })
    }

    pub fn origin(&self) -> Point3 {
        self.pose.translation.vector
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Signed distance from `x` to the measurement `p` along the ray from `s`.
///
/// Positive on the sensor side of `p`, negative behind it; zero maps to `+0`.
pub fn projective_distance(x: &Point3, p: &Point3, s: &Point3) -> f64 {
    let to_p = p - x;
    let mag = to_p.norm();
    if to_p.dot(&(p - s)) < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Weight carried by the measurement itself, before any behind-surface drop-off.
pub(crate) fn measurement_weight(range: f64, mode: WeightMode) -> f64 {
    match mode {
        WeightMode::Constant => 1.0,
        WeightMode::InverseSquare | WeightMode::InverseSquareDropoff => 1.0 / (range * range),
    }
}

/// Linear drop-off factor behind the surface, in `[0, 1]`.
pub(crate) fn dropoff_factor(d: f64, config: &TsdfConfig) -> f64 {
    if config.weight_mode != WeightMode::InverseSquareDropoff {
        return 1.0;
    }
    let (delta, eps) = (config.truncation, config.dropoff_epsilon);
    if d > -eps {
        1.0
    } else if d > -delta {
        (d + delta) / (delta - eps)
    } else {
        0.0
    }
}

/// Weight of measurement `p` (sensor at `s`) for the voxel centered at `x`.
pub fn weight(x: &Point3, p: &Point3, s: &Point3, config: &TsdfConfig) -> f64 {
    let z = (p - s).norm();
    let d = projective_distance(x, p, s);
    measurement_weight(z, config.weight_mode) * dropoff_factor(d, config)
}

/// Weighted running-mean update of one voxel.
///
/// `d` is clamped to `±truncation` before merging and the weight saturates at
/// `max_weight`. A zero weight leaves the voxel untouched.
pub fn update_voxel(
    voxel: &mut TsdfVoxel,
    d: f64,
    w: f64,
    color: Option<[u8; 3]>,
    truncation: f64,
    max_weight: f64,
) {
    if !(w > 0.0) {
        return;
    }
    let d = d.clamp(-truncation, truncation);
    let old_w = voxel.weight as f64;
    let total = old_w + w;
    voxel.distance = ((old_w * voxel.distance as f64 + w * d) / total) as f32;
    if let Some(c) = color {
        for (dst, src) in voxel.color.iter_mut().zip(c) {
            *dst = ((old_w * *dst as f64 + w * src as f64) / total).round() as u8;
        }
    }
    voxel.weight = total.min(max_weight) as f32;
}
