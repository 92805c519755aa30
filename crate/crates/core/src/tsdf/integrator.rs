use rustc_hash::{FxHashMap, FxHashSet};

use super::raycast::VoxelTraversal;
use super::{
    dropoff_factor, measurement_weight, projective_distance, update_voxel, MergeMode, Scan,
    TsdfConfig, TsdfVoxel,
};
use crate::error::Result;
use crate::index::{global_index_from_point, split_global_index, BlockIndex, GlobalVoxelIndex};
use crate::layer::Layer;
use crate::Point3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    /// Points that passed the ray-length filter.
    pub points_integrated: usize,
    /// Points dropped for being outside `[min_ray_length, max_ray_length]`.
    pub points_skipped: usize,
    pub rays_cast: usize,
    /// Voxel updates with nonzero weight.
    pub voxel_updates: usize,
    /// Pass-through updates suppressed by the anti-grazing filter.
    pub grazing_suppressed: usize,
}

impl std::ops::AddAssign for IntegrationStats {
    fn add_assign(&mut self, o: Self) {
        self.points_integrated += o.points_integrated;
        self.points_skipped += o.points_skipped;
        self.rays_cast += o.rays_cast;
        self.voxel_updates += o.voxel_updates;
        self.grazing_suppressed += o.grazing_suppressed;
    }
}

/// A merged measurement ready to be raycast.
struct Measurement {
    point: Point3,
    weight: f64,
    color: Option<[u8; 3]>,
}

#[derive(Default)]
struct Bucket {
    terminal: GlobalVoxelIndex,
    weight: f64,
    point_sum: Point3,
    color_sum: [f64; 3],
}

/// Fuses [`Scan`]s into a TSDF layer.
#[derive(Debug, Clone)]
pub struct TsdfIntegrator {
    config: TsdfConfig,
}

impl TsdfIntegrator {
    pub fn new(config: TsdfConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &TsdfConfig {
        &self.config
    }

    /// Integrate with the configured merge mode.
    pub fn integrate(&self, layer: &mut Layer<TsdfVoxel>, scan: &Scan) -> IntegrationStats {
        match self.config.merge_mode {
            MergeMode::SimpleRaycast => self.integrate_simple(layer, scan),
            MergeMode::GroupedRaycast => self.integrate_grouped(layer, scan, false),
            MergeMode::GroupedAntiGrazing => self.integrate_grouped(layer, scan, true),
        }
    }

    /// One raycast per point.
    pub fn integrate_simple(&self, layer: &mut Layer<TsdfVoxel>, scan: &Scan) -> IntegrationStats {
        let mut stats = IntegrationStats::default();
        let origin = scan.origin();
        let mut cursor = BlockCursor::default();
        for (i, p) in scan.points.iter().enumerate() {
            let Some(range) = self.accept(p, &mut stats) else {
                continue;
            };
            let m = Measurement {
                point: (scan.pose * nalgebra::Point3::from(*p)).coords,
                weight: measurement_weight(range, self.config.weight_mode),
                color: scan.colors.as_ref().map(|c| c[i]),
            };
            self.cast(layer, &origin, &m, None, &mut cursor, &mut stats);
        }
        stats
    }

    /// Bucket points by terminal voxel and cast one ray per bucket from the
    /// weighted mean point with the summed weight. With `anti_grazing`, rays
    /// do not update other buckets' terminal voxels in front of their own
    /// measurement.
    pub fn integrate_grouped(
        &self,
        layer: &mut Layer<TsdfVoxel>,
        scan: &Scan,
        anti_grazing: bool,
    ) -> IntegrationStats {
        let mut stats = IntegrationStats::default();
        let origin = scan.origin();
        let v = layer.voxel_size();

        let mut slots: FxHashMap<GlobalVoxelIndex, usize> = FxHashMap::default();
        let mut buckets: Vec<Bucket> = Vec::new();
        for (i, p) in scan.points.iter().enumerate() {
            let Some(range) = self.accept(p, &mut stats) else {
                continue;
            };
            let world = (scan.pose * nalgebra::Point3::from(*p)).coords;
            let w = measurement_weight(range, self.config.weight_mode);
            let terminal = global_index_from_point(&world, v);
            let slot = *slots.entry(terminal).or_insert_with(|| {
                buckets.push(Bucket {
                    terminal,
                    ..Default::default()
                });
                buckets.len() - 1
            });
            let b = &mut buckets[slot];
            b.weight += w;
            b.point_sum += world * w;
            if let Some(colors) = &scan.colors {
                for (acc, c) in b.color_sum.iter_mut().zip(colors[i]) {
                    *acc += w * c as f64;
                }
            }
        }

        let terminals: Option<FxHashSet<GlobalVoxelIndex>> =
            anti_grazing.then(|| slots.keys().copied().collect());
        let mut cursor = BlockCursor::default();
        for b in &buckets {
            let m = Measurement {
                point: b.point_sum / b.weight,
                weight: b.weight,
                color: scan
                    .colors
                    .as_ref()
                    .map(|_| b.color_sum.map(|c| (c / b.weight).round().clamp(0.0, 255.0) as u8)),
            };
            let skip = terminals.as_ref().map(|t| (t, b.terminal));
            self.cast(layer, &origin, &m, skip, &mut cursor, &mut stats);
        }
        stats
    }

    /// Range of a sensor-frame point if it passes the length filter.
    fn accept(&self, p: &Point3, stats: &mut IntegrationStats) -> Option<f64> {
        let range = p.norm();
        if range <= 0.0
            || range < self.config.min_ray_length
            || range > self.config.max_ray_length
            || !range.is_finite()
        {
            stats.points_skipped += 1;
            return None;
        }
        stats.points_integrated += 1;
        Some(range)
    }

    fn cast(
        &self,
        layer: &mut Layer<TsdfVoxel>,
        origin: &Point3,
        m: &Measurement,
        skip: Option<(&FxHashSet<GlobalVoxelIndex>, GlobalVoxelIndex)>,
        cursor: &mut BlockCursor,
        stats: &mut IntegrationStats,
    ) {
        let cfg = &self.config;
        let v = layer.voxel_size();
        let vps = layer.voxels_per_side();
        let ray = m.point - origin;
        let len = ray.norm();
        if len <= 0.0 {
            return;
        }
        let end = m.point + ray * (cfg.truncation / len);
        stats.rays_cast += 1;

        for g in VoxelTraversal::new(origin, &end, v) {
            let x = g.center(v);
            let d = projective_distance(&x, &m.point, origin);
            if let Some((terminals, own)) = skip {
                if d > 0.0 && g != own && terminals.contains(&g) {
                    stats.grazing_suppressed += 1;
                    continue;
                }
            }
            let w = m.weight * dropoff_factor(d, cfg);
            if !(w > 0.0) {
                continue;
            }
            let (b, l) = split_global_index(g, vps);
            let slot = cursor.slot(layer, b);
            let voxel = &mut layer.block_at_mut(slot).voxels_mut()[l.linear(vps)];
            update_voxel(voxel, d, w, m.color, cfg.truncation, cfg.max_weight);
            stats.voxel_updates += 1;
        }
    }
}

/// Remembers the last block touched so consecutive voxels skip the hash
/// lookup, and marks each newly entered block as updated.
#[derive(Default)]
struct BlockCursor {
    last: Option<(BlockIndex, usize)>,
}

impl BlockCursor {
    fn slot(&mut self, layer: &mut Layer<TsdfVoxel>, b: BlockIndex) -> usize {
        if let Some((idx, slot)) = self.last {
            if idx == b {
                return slot;
            }
        }
        let slot = layer.allocate_slot(b);
        layer.mark_updated(b);
        self.last = Some((b, slot));
        slot
    }
}
