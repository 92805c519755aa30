//! Number of map lookups needed to collision-check a spherical robot.

use std::f64::consts::PI;

/// What the occupancy lookup count divides the sphere volume by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoxelMeasure {
    /// Voxel volume `v³`.
    #[default]
    Volume,
    /// The voxel edge length `v`, as the formula is sometimes printed.
    EdgeLength,
}

impl VoxelMeasure {
    fn of(self, v: f64) -> f64 {
        match self {
            VoxelMeasure::Volume => v * v * v,
            VoxelMeasure::EdgeLength => v,
        }
    }
}

/// Voxels touched when checking one sphere of radius `r` in an occupancy map.
pub fn occupancy_lookup_count(r: f64, v: f64, measure: VoxelMeasure) -> u64 {
    (4.0 / 3.0 * PI * r.powi(3) / measure.of(v)).ceil() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookupCounts {
    /// Occupancy lookups along the trajectory.
    pub occupancy: u64,
    /// ESDF lookups when every step can only advance by the robot radius.
    pub esdf_max: u64,
    /// ESDF lookups when every step can advance by `d_max`.
    pub esdf_min: u64,
}

/// Lookup counts for a trajectory of arc length `l`. Occupancy checks place
/// a sphere every `r` along the path and only the new `(9/8)πr³` part of each
/// sphere is looked up.
pub fn trajectory_lookup_counts(r: f64, v: f64, l: f64, d_max: f64, measure: VoxelMeasure) -> LookupCounts {
    let per_sphere = (9.0 / 8.0 * PI * r.powi(3) / measure.of(v)).ceil();
    LookupCounts {
        occupancy: (per_sphere * (l / r)).ceil() as u64,
        esdf_max: (l / r).ceil() as u64,
        esdf_min: (l / d_max).ceil() as u64,
    }
}
