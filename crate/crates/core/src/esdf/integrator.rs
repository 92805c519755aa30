//! Raise/lower wavefront propagation from TSDF updates.
//!
//! Each updated TSDF voxel is classified as fixed (inside the band, value
//! copied) or free (sign taken from the TSDF, magnitude to be propagated).
//! All raise work runs before any lower work. Propagation never enters
//! unobserved voxels. Free voxels relax only neighbors on their own side of
//! the surface; fixed voxels also seed the other side, since a surface
//! estimate `d` implies `d - s` one step `s` across it.

use std::time::{Duration, Instant};

use super::queue::WavefrontQueue;
use super::{is_fixed, EsdfConfig, EsdfVoxel, Metric, QueueMode};
use crate::error::Result;
use crate::index::{step_length, BlockIndex, GlobalVoxelIndex, LocalVoxelIndex, NEIGHBOR_OFFSETS};
use crate::layer::{Layer, UpdateConsumer};
use crate::tsdf::TsdfVoxel;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PropagationStats {
    /// TSDF voxels examined.
    pub updated_voxels: usize,
    /// Voxels reset to `±d_max` by the raise wavefront.
    pub raised: usize,
    /// Successful relaxations by the lower wavefront.
    pub lowered: usize,
    pub raise_pops: usize,
    pub lower_pops: usize,
    pub elapsed: Duration,
}

impl std::ops::AddAssign for PropagationStats {
    fn add_assign(&mut self, o: Self) {
        self.updated_voxels += o.updated_voxels;
        self.raised += o.raised;
        self.lowered += o.lowered;
        self.raise_pops += o.raise_pops;
        self.lower_pops += o.lower_pops;
        self.elapsed += o.elapsed;
    }
}

/// How TSDF voxels seed the ESDF.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Seeding {
    /// `|d| < γ` is fixed at `d`.
    Band { gamma: f64 },
    /// `d < 0` is fixed at zero; everything else is free space.
    Occupancy,
}

impl Seeding {
    fn fixed_value(&self, d: f32) -> Option<f32> {
        match *self {
            Seeding::Band { gamma } => is_fixed(d as f64, gamma).then_some(d),
            Seeding::Occupancy => (d < 0.0).then_some(0.0),
        }
    }

    fn free_positive(&self, d: f32) -> bool {
        match self {
            Seeding::Band { .. } => d >= 0.0,
            Seeding::Occupancy => true,
        }
    }
}

/// Block slot and linear offset of a voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct VoxelRef {
    slot: u32,
    lin: u32,
}

#[derive(Debug, Clone)]
pub struct EsdfIntegrator {
    config: EsdfConfig,
    voxel_size: f64,
    voxels_per_side: usize,
    gamma: f64,
}

impl EsdfIntegrator {
    /// `truncation` is the TSDF truncation distance δ the fixed band refers to.
    pub fn new(
        config: EsdfConfig,
        voxel_size: f64,
        voxels_per_side: usize,
        truncation: f64,
    ) -> Result<Self> {
        config.validate(voxel_size, truncation)?;
        let gamma = config.fixed_band.radius(voxel_size, truncation);
        Ok(Self {
            config,
            voxel_size,
            voxels_per_side,
            gamma,
        })
    }

    pub fn config(&self) -> &EsdfConfig {
        &self.config
    }

    /// Fixed-band radius γ.
    pub fn band_radius(&self) -> f64 {
        self.gamma
    }

    /// An empty ESDF layer matching the TSDF geometry.
    pub fn new_layer(&self) -> Layer<EsdfVoxel> {
        Layer::with_fill(
            self.voxel_size,
            self.voxels_per_side,
            EsdfVoxel::unobserved(self.config.d_max),
        )
    }

    /// Propagate the voxels of every TSDF block updated since the last call.
    pub fn update_from_tsdf(
        &self,
        tsdf: &mut Layer<TsdfVoxel>,
        esdf: &mut Layer<EsdfVoxel>,
    ) -> PropagationStats {
        let blocks = tsdf.drain_updated(UpdateConsumer::Esdf);
        self.propagate_blocks(tsdf, &blocks, esdf)
    }

    /// Propagate every voxel of the given TSDF blocks.
    pub fn propagate_blocks(
        &self,
        tsdf: &Layer<TsdfVoxel>,
        blocks: &[BlockIndex],
        esdf: &mut Layer<EsdfVoxel>,
    ) -> PropagationStats {
        let seeding = Seeding::Band { gamma: self.gamma };
        let mut wave = Wave::new(self, esdf, seeding);
        for &b in blocks {
            let Some(block) = tsdf.block(b) else { continue };
            let slot = wave.allocate(b);
            for (lin, t) in block.voxels().iter().enumerate() {
                wave.visit(VoxelRef { slot, lin: lin as u32 }, t);
            }
        }
        wave.finish()
    }

    /// Propagate an explicit set of updated TSDF voxels.
    pub fn propagate(
        &self,
        tsdf: &Layer<TsdfVoxel>,
        updated: &[GlobalVoxelIndex],
        esdf: &mut Layer<EsdfVoxel>,
    ) -> PropagationStats {
        self.propagate_seeded(tsdf, updated, esdf, Seeding::Band { gamma: self.gamma })
    }

    fn propagate_seeded(
        &self,
        tsdf: &Layer<TsdfVoxel>,
        updated: &[GlobalVoxelIndex],
        esdf: &mut Layer<EsdfVoxel>,
        seeding: Seeding,
    ) -> PropagationStats {
        let vps = self.voxels_per_side;
        let mut wave = Wave::new(self, esdf, seeding);
        for &g in updated {
            let Some(t) = tsdf.voxel(g) else { continue };
            let (b, l) = crate::index::split_global_index(g, vps);
            let slot = wave.allocate(b);
            wave.visit(
                VoxelRef {
                    slot,
                    lin: l.linear(vps) as u32,
                },
                t,
            );
        }
        wave.finish()
    }

    /// ESDF built in one pass over every observed TSDF voxel.
    pub fn build_batch(&self, tsdf: &Layer<TsdfVoxel>) -> Layer<EsdfVoxel> {
        let mut esdf = self.new_layer();
        let blocks: Vec<BlockIndex> = tsdf.block_indices().collect();
        self.propagate_blocks(tsdf, &blocks, &mut esdf);
        esdf
    }

    /// Baseline that treats negative TSDF voxels as occupied at distance zero
    /// and lowers outward; produces no negative distances.
    pub fn build_from_occupancy(&self, tsdf: &Layer<TsdfVoxel>) -> Layer<EsdfVoxel> {
        let mut esdf = self.new_layer();
        let mut wave = Wave::new(self, &mut esdf, Seeding::Occupancy);
        for block in tsdf.blocks() {
            let slot = wave.allocate(block.index());
            for (lin, t) in block.voxels().iter().enumerate() {
                wave.visit(VoxelRef { slot, lin: lin as u32 }, t);
            }
        }
        wave.finish();
        esdf
    }
}

/// One propagation pass: the queues plus the layer they operate on.
struct Wave<'a> {
    cfg: &'a EsdfIntegrator,
    esdf: &'a mut Layer<EsdfVoxel>,
    seeding: Seeding,
    raise: WavefrontQueue<VoxelRef>,
    lower: WavefrontQueue<VoxelRef>,
    d_max: f32,
    /// Slots of the 27 blocks around each block, filled on first use.
    block_neighbors: Vec<[u32; 27]>,
    stats: PropagationStats,
    started: Instant,
}

const UNKNOWN_SLOT: u32 = u32::MAX;
const NO_SLOT: u32 = u32::MAX - 1;

#[derive(Clone, Copy)]
enum Which {
    Raise,
    Lower,
}

fn same_side(a: f32, b: f32) -> bool {
    (a >= 0.0) == (b >= 0.0)
}

impl<'a> Wave<'a> {
    fn new(cfg: &'a EsdfIntegrator, esdf: &'a mut Layer<EsdfVoxel>, seeding: Seeding) -> Self {
        let c = &cfg.config;
        esdf.set_fill(EsdfVoxel::unobserved(c.d_max));
        let width = c.bucket_width.unwrap_or(cfg.voxel_size);
        Self {
            cfg,
            esdf,
            seeding,
            raise: WavefrontQueue::new(c.queue_mode, width, c.d_max),
            lower: WavefrontQueue::new(c.queue_mode, width, c.d_max),
            d_max: c.d_max as f32,
            block_neighbors: Vec::new(),
            stats: PropagationStats::default(),
            started: Instant::now(),
        }
    }

    #[inline]
    fn voxel(&self, r: VoxelRef) -> &EsdfVoxel {
        &self.esdf.block_at(r.slot as usize).voxels()[r.lin as usize]
    }

    #[inline]
    fn voxel_mut(&mut self, r: VoxelRef) -> &mut EsdfVoxel {
        &mut self.esdf.block_at_mut(r.slot as usize).voxels_mut()[r.lin as usize]
    }

    fn global(&self, r: VoxelRef) -> GlobalVoxelIndex {
        self.esdf.block_at(r.slot as usize).global_index(r.lin as usize)
    }

    /// Slot of block `b`, allocating it if needed.
    fn allocate(&mut self, b: BlockIndex) -> u32 {
        let before = self.esdf.num_blocks();
        let slot = self.esdf.allocate_slot(b);
        if self.esdf.num_blocks() > before {
            // Cached "no block" entries of the surrounding blocks are stale.
            for key in 0..27usize {
                let bo = [key % 3, (key / 3) % 3, key / 9].map(|c| c as i64 - 1);
                let nb = BlockIndex {
                    x: b.x + bo[0],
                    y: b.y + bo[1],
                    z: b.z + bo[2],
                };
                if let Some(ns) = self.esdf.slot(nb) {
                    if let Some(entry) = self.block_neighbors.get_mut(ns) {
                        entry[26 - key] = UNKNOWN_SLOT;
                    }
                }
            }
        }
        slot as u32
    }

    /// Neighbor of `r` at `off`, if its block is allocated.
    #[inline]
    fn neighbor(&mut self, r: VoxelRef, off: [i64; 3]) -> Option<VoxelRef> {
        let vps = self.cfg.voxels_per_side;
        let n = vps as i64;
        let l = LocalVoxelIndex::from_linear(r.lin as usize, vps);
        let p = [l.x as i64 + off[0], l.y as i64 + off[1], l.z as i64 + off[2]];
        let lin = |q: [i64; 3]| (q[0] + n * (q[1] + n * q[2])) as u32;
        if p.iter().all(|c| (0..n).contains(c)) {
            return Some(VoxelRef { slot: r.slot, lin: lin(p) });
        }
        let bo = p.map(|c| c.div_euclid(n));
        let local = p.map(|c| c.rem_euclid(n));
        let key = ((bo[0] + 1) + 3 * ((bo[1] + 1) + 3 * (bo[2] + 1))) as usize;
        let s = r.slot as usize;
        if s >= self.block_neighbors.len() {
            self.block_neighbors.resize(self.esdf.num_blocks(), [UNKNOWN_SLOT; 27]);
        }
        let mut slot = self.block_neighbors[s][key];
        if slot == UNKNOWN_SLOT {
            let b = self.esdf.block_at(s).index();
            let nb = BlockIndex {
                x: b.x + bo[0],
                y: b.y + bo[1],
                z: b.z + bo[2],
            };
            slot = self.esdf.slot(nb).map_or(NO_SLOT, |x| x as u32);
            self.block_neighbors[s][key] = slot;
        }
        (slot != NO_SLOT).then(|| VoxelRef { slot, lin: lin(local) })
    }

    fn push(&mut self, which: Which, r: VoxelRef) {
        let multi = self.cfg.config.queue_mode == QueueMode::PriorityMultiInsert;
        let d_max = self.d_max;
        let v = self.voxel_mut(r);
        // A free voxel at ±d_max has nothing to lower its neighbors with;
        // queueing it would also pin it at the lowest priority.
        if matches!(which, Which::Lower) && !v.fixed && v.distance.abs() >= d_max {
            return;
        }
        let flag = match which {
            Which::Raise => &mut v.in_raise,
            Which::Lower => &mut v.in_lower,
        };
        if *flag && !multi {
            return;
        }
        *flag = true;
        let priority = v.distance.abs() as f64;
        match which {
            Which::Raise => self.raise.push(r, priority),
            Which::Lower => self.lower.push(r, priority),
        }
    }

    fn push_neighbors_lower(&mut self, r: VoxelRef) {
        for off in NEIGHBOR_OFFSETS {
            if let Some(n) = self.neighbor(r, off) {
                if self.voxel(n).observed {
                    self.push(Which::Lower, n);
                }
            }
        }
    }

    /// Classify one updated TSDF voxel and queue the resulting work.
    fn visit(&mut self, r: VoxelRef, t: &TsdfVoxel) {
        if !t.observed() {
            return;
        }
        self.stats.updated_voxels += 1;
        let d_max = self.d_max;
        let seeding = self.seeding;
        let e = *self.voxel(r);

        if let Some(fixed_d) = seeding.fixed_value(t.distance) {
            let v = self.voxel_mut(r);
            v.parent = [0; 3];
            if !e.observed {
                v.observed = true;
                v.fixed = true;
                v.distance = fixed_d;
                self.push(Which::Lower, r);
                return;
            }
            let was_fixed = e.fixed;
            v.fixed = true;
            v.distance = fixed_d;
            if same_side(e.distance, fixed_d) && e.distance == fixed_d {
                if !was_fixed {
                    self.push(Which::Lower, r);
                }
            } else if same_side(e.distance, fixed_d) && fixed_d.abs() < e.distance.abs() {
                // Closer to the surface: better for its own side, worse for
                // anything it seeded across the surface.
                self.raise_cross_children(r, fixed_d);
                self.push(Which::Lower, r);
            } else {
                // Moved away from the surface or changed side: whatever was
                // derived from the old value is stale.
                self.push(Which::Raise, r);
                self.push(Which::Lower, r);
            }
            return;
        }

        let free = if seeding.free_positive(t.distance) {
            d_max
        } else {
            -d_max
        };
        if !e.observed {
            let v = self.voxel_mut(r);
            v.observed = true;
            v.fixed = false;
            v.distance = free;
            v.parent = [0; 3];
            self.push_neighbors_lower(r);
        } else if e.fixed || !same_side(e.distance, free) {
            let v = self.voxel_mut(r);
            v.fixed = false;
            v.distance = free;
            v.parent = [0; 3];
            self.push(Which::Raise, r);
        }
    }

    /// Queue for raising the free neighbors on the far side of the surface
    /// whose values were derived from fixed voxel `r`.
    fn raise_cross_children(&mut self, r: VoxelRef, d: f32) {
        let g = self.global(r);
        for off in NEIGHBOR_OFFSETS {
            let Some(n) = self.neighbor(r, off) else { continue };
            let nv = *self.voxel(n);
            if !nv.observed || nv.fixed || same_side(nv.distance, d) || nv.parent == [0; 3] {
                continue;
            }
            if g.offset(off).offset(nv.parent.map(i64::from)) == g {
                self.push(Which::Raise, n);
            }
        }
    }

    fn finish(mut self) -> PropagationStats {
        self.process_raise();
        self.process_lower();
        self.stats.elapsed = self.started.elapsed();
        self.stats
    }

    /// Reset every voxel whose value derives from a raised voxel, and queue
    /// the boundary of the invalidated region for lowering.
    fn process_raise(&mut self) {
        let euclidean = self.cfg.config.metric == Metric::Euclidean;
        while let Some(r) = self.raise.pop() {
            self.stats.raise_pops += 1;
            let u = *self.voxel(r);
            self.voxel_mut(r).in_raise = false;
            if !u.observed {
                continue;
            }
            if !u.fixed {
                let reset = if u.distance >= 0.0 { self.d_max } else { -self.d_max };
                let v = self.voxel_mut(r);
                v.distance = reset;
                v.parent = [0; 3];
                self.stats.raised += 1;
            }
            let g = self.global(r);
            // Children hang off this voxel (quasi) or share its seed (euclidean).
            let anchor = if euclidean {
                g.offset(u.parent.map(i64::from))
            } else {
                g
            };
            for off in NEIGHBOR_OFFSETS {
                let Some(n) = self.neighbor(r, off) else { continue };
                let nv = *self.voxel(n);
                if !nv.observed {
                    continue;
                }
                let is_child = !nv.fixed
                    && nv.parent != [0; 3]
                    && g.offset(off).offset(nv.parent.map(i64::from)) == anchor;
                self.push(if is_child { Which::Raise } else { Which::Lower }, n);
            }
        }
    }

    /// Relax neighbors until no voxel can be lowered further.
    fn process_lower(&mut self) {
        let euclidean = self.cfg.config.metric == Metric::Euclidean;
        let v_size = self.cfg.voxel_size;
        let step_dist: [f64; 26] = NEIGHBOR_OFFSETS.map(|o| step_length(o) * v_size);
        while let Some(r) = self.lower.pop() {
            self.stats.lower_pops += 1;
            let u = *self.voxel(r);
            self.voxel_mut(r).in_lower = false;
            if !u.observed || (!u.fixed && u.distance.abs() >= self.d_max) {
                continue;
            }

            // Euclidean mode measures from the seed voxel rather than from u.
            let (seed_d, seed_off) = if euclidean && !u.fixed {
                let seed = self.global(r).offset(u.parent.map(i64::from));
                match self.esdf.voxel(seed) {
                    Some(s) if s.fixed => {
                        (s.distance as f64, u.parent.map(i64::from))
                    }
                    _ => continue,
                }
            } else {
                (u.distance as f64, [0i64; 3])
            };

            for (k, off) in NEIGHBOR_OFFSETS.iter().enumerate() {
                let Some(n) = self.neighbor(r, *off) else { continue };
                let nv = *self.voxel(n);
                if !nv.observed || nv.fixed || !(u.fixed || same_side(nv.distance, u.distance)) {
                    continue;
                }
                let (dist, parent) = if euclidean {
                    let o = [
                        seed_off[0] - off[0],
                        seed_off[1] - off[1],
                        seed_off[2] - off[2],
                    ];
                    (step_length(o) * v_size, o)
                } else {
                    (step_dist[k], off.map(|c| -c))
                };
                // The target's side decides the direction; a candidate that
                // lands on the wrong side carries no information.
                let (cand, better) = if nv.distance >= 0.0 {
                    let c = (seed_d + dist) as f32;
                    (c, c >= 0.0 && c < nv.distance)
                } else {
                    let c = (seed_d - dist) as f32;
                    (c, c < 0.0 && c > nv.distance)
                };
                if better {
                    let v = self.voxel_mut(n);
                    v.distance = cand;
                    v.parent = parent.map(|c| c as i8);
                    self.stats.lowered += 1;
                    self.push(Which::Lower, n);
                }
            }
        }
    }
}
