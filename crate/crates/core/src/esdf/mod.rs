//! Euclidean signed distance fields maintained incrementally from a TSDF.

mod integrator;
pub mod queue;

pub use integrator::{EsdfIntegrator, PropagationStats};

use crate::error::{Error, Result};
use crate::layer::{Layer, LayerKind, SdfVoxel, Voxel};
use crate::tsdf::TsdfVoxel;

pub const DEFAULT_MAX_DISTANCE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EsdfVoxel {
    pub distance: f32,
    pub observed: bool,
    /// Copied from the TSDF and never touched by the wavefronts.
    pub fixed: bool,
    pub in_raise: bool,
    pub in_lower: bool,
    /// Offset to the parent voxel (quasi-Euclidean) or to the seed voxel
    /// (Euclidean). Zero for fixed, unobserved and unreached voxels.
    pub parent: [i8; 3],
}

impl EsdfVoxel {
    /// A freshly allocated voxel: unknown, at `+d_max`.
    pub fn unobserved(d_max: f64) -> Self {
        Self {
            distance: d_max as f32,
            ..Default::default()
        }
    }

    fn flags(&self) -> u8 {
        self.observed as u8
            | (self.fixed as u8) << 1
            | (self.in_raise as u8) << 2
            | (self.in_lower as u8) << 3
    }
}

impl SdfVoxel for EsdfVoxel {
    fn distance(&self) -> f32 {
        self.distance
    }
    fn is_observed(&self) -> bool {
        self.observed
    }
}

impl Voxel for EsdfVoxel {
    const KIND: LayerKind = LayerKind::Esdf;
    const ENCODED_LEN: usize = 8;

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.distance.to_le_bytes());
        out.push(self.flags());
        out.extend(self.parent.map(|p| p as u8));
    }

    fn decode(b: &[u8]) -> Self {
        let flags = b[4];
        Self {
            distance: f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            observed: flags & 1 != 0,
            fixed: flags & 2 != 0,
            in_raise: flags & 4 != 0,
            in_lower: flags & 8 != 0,
            parent: [b[5] as i8, b[6] as i8, b[7] as i8],
        }
    }
}

/// Which TSDF voxels are copied verbatim into the ESDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedBand {
    /// `|d| < v`
    OneVoxel,
    /// `|d| < δ/2`
    HalfTruncation,
}

impl FixedBand {
    pub fn radius(&self, voxel_size: f64, truncation: f64) -> f64 {
        match self {
            FixedBand::OneVoxel => voxel_size,
            FixedBand::HalfTruncation => truncation / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Path length along axis, face-diagonal and cube-diagonal grid steps.
    QuasiEuclidean,
    /// Seed distance plus the straight-line offset to the seed voxel.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueMode {
    Fifo,
    PrioritySingleInsert,
    PriorityMultiInsert,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsdfConfig {
    pub d_max: f64,
    pub fixed_band: FixedBand,
    pub metric: Metric,
    pub queue_mode: QueueMode,
    /// Width of a priority bucket; the voxel size when `None`.
    pub bucket_width: Option<f64>,
}

impl Default for EsdfConfig {
    fn default() -> Self {
        Self {
            d_max: DEFAULT_MAX_DISTANCE,
            fixed_band: FixedBand::OneVoxel,
            metric: Metric::QuasiEuclidean,
            queue_mode: QueueMode::PrioritySingleInsert,
            bucket_width: None,
        }
    }
}

impl EsdfConfig {
    pub fn validate(&self, voxel_size: f64, truncation: f64) -> Result<()> {
        let gamma = self.fixed_band.radius(voxel_size, truncation);
        if !(gamma > 0.0 && gamma <= truncation) {
            return Err(Error::Config(format!(
                "fixed band radius {gamma} must lie in (0, truncation {truncation}]"
            )));
        }
        if !(self.d_max > gamma) {
            return Err(Error::Config(format!(
                "d_max ({}) must exceed the fixed band radius ({gamma})",
                self.d_max
            )));
        }
        if self.metric == Metric::Euclidean && (self.d_max + gamma) / voxel_size > i8::MAX as f64 {
            return Err(Error::Config(format!(
                "euclidean mode stores seed offsets as i8: (d_max + band) / voxel size = {:.1} exceeds 127",
                (self.d_max + gamma) / voxel_size
            )));
        }
        if let Some(w) = self.bucket_width {
            if !(w > 0.0) {
                return Err(Error::Config(format!("bucket width must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Whether a TSDF distance falls inside the fixed band `(-γ, γ)`.
pub fn is_fixed(d_tsdf: f64, gamma: f64) -> bool {
    -gamma < d_tsdf && d_tsdf < gamma
}

/// Counts of voxels breaking the ESDF invariants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvariantViolations {
    /// Voxels with `|d| > d_max`.
    pub out_of_range: usize,
    /// Fixed-band TSDF voxels whose ESDF voxel is not fixed at the TSDF value.
    pub band_mismatch: usize,
    /// Fixed voxels that are not observed.
    pub fixed_unobserved: usize,
}

impl InvariantViolations {
    pub fn total(&self) -> usize {
        self.out_of_range + self.band_mismatch + self.fixed_unobserved
    }
}

/// Check range, fixed-band and flag invariants of an ESDF that has consumed
/// every update of `tsdf`.
pub fn check_invariants(
    tsdf: &Layer<TsdfVoxel>,
    esdf: &Layer<EsdfVoxel>,
    gamma: f64,
    d_max: f64,
) -> InvariantViolations {
    let limit = d_max as f32;
    let mut out = InvariantViolations::default();
    for (_, e) in esdf.iter_voxels() {
        if e.distance.abs() > limit {
            out.out_of_range += 1;
        }
        if e.fixed && !e.observed {
            out.fixed_unobserved += 1;
        }
    }
    for (g, t) in tsdf.iter_voxels() {
        if t.observed() && is_fixed(t.distance as f64, gamma) {
            match esdf.voxel(g) {
                Some(e) if e.fixed && e.observed && e.distance == t.distance => {}
                _ => out.band_mismatch += 1,
            }
        }
    }
    out
}
