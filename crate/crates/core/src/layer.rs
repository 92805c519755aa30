//! Voxel-hashed layered storage.
//!
//! A [`Layer`] maps [`BlockIndex`] to dense [`Block`]s of `vps³` voxels, laid
//! out x fastest. Blocks are allocated on demand and never freed, so a block's
//! slot number stays valid for the lifetime of the layer.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::index::{
    global_index_from_point, join_global_index, split_global_index, BlockIndex, GlobalVoxelIndex,
    LocalVoxelIndex,
};
use crate::Point3;

pub const DEFAULT_VOXELS_PER_SIDE: usize = 16;

/// Stored in the layer file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Tsdf = 0,
    Esdf = 1,
}

impl LayerKind {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(LayerKind::Tsdf),
            1 => Some(LayerKind::Esdf),
            _ => None,
        }
    }
}

/// Fixed-size binary voxel payload.
pub trait Voxel: Copy + Default + Send + Sync + 'static {
    const KIND: LayerKind;
    const ENCODED_LEN: usize;
    fn encode(&self, out: &mut Vec<u8>);
    /// `bytes` is exactly `ENCODED_LEN` long.
    fn decode(bytes: &[u8]) -> Self;
}

/// A voxel carrying a signed distance that may or may not be known.
pub trait SdfVoxel {
    fn distance(&self) -> f32;
    fn is_observed(&self) -> bool;
}

/// Downstream consumers that drain a layer's updated-block set independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateConsumer {
    Esdf = 0,
    Mesh = 1,
}

const NUM_CONSUMERS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Block<V> {
    index: BlockIndex,
    vps: usize,
    voxels: Box<[V]>,
}

impl<V: Copy> Block<V> {
    pub fn new(index: BlockIndex, vps: usize, fill: V) -> Self {
        Self {
            index,
            vps,
            voxels: vec![fill; vps * vps * vps].into_boxed_slice(),
        }
    }

    pub fn index(&self) -> BlockIndex {
        self.index
    }

    pub fn voxels(&self) -> &[V] {
        &self.voxels
    }

    pub fn voxels_mut(&mut self) -> &mut [V] {
        &mut self.voxels
    }

    pub fn voxel(&self, local: LocalVoxelIndex) -> &V {
        &self.voxels[local.linear(self.vps)]
    }

    pub fn voxel_mut(&mut self, local: LocalVoxelIndex) -> &mut V {
        &mut self.voxels[local.linear(self.vps)]
    }

    /// Global index of the voxel stored at linear offset `i`.
    pub fn global_index(&self, i: usize) -> GlobalVoxelIndex {
        join_global_index(self.index, LocalVoxelIndex::from_linear(i, self.vps), self.vps)
    }

    /// Iterate `(global index, voxel)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (GlobalVoxelIndex, &V)> + '_ {
        self.voxels.iter().enumerate().map(move |(i, v)| (self.global_index(i), v))
    }
}

#[derive(Debug, Clone)]
pub struct Layer<V> {
    voxel_size: f64,
    vps: usize,
    fill: V,
    slots: FxHashMap<BlockIndex, usize>,
    blocks: Vec<Block<V>>,
    updated: [FxHashSet<BlockIndex>; NUM_CONSUMERS],
}

impl<V: Voxel> Layer<V> {
    pub fn new(voxel_size: f64, voxels_per_side: usize) -> Self {
        Self::with_fill(voxel_size, voxels_per_side, V::default())
    }

    /// A layer whose freshly allocated voxels are copies of `fill`.
    pub fn with_fill(voxel_size: f64, voxels_per_side: usize, fill: V) -> Self {
        assert!(voxel_size > 0.0, "voxel size must be positive");
        assert!(voxels_per_side >= 1, "voxels_per_side must be at least 1");
        Self {
            voxel_size,
            vps: voxels_per_side,
            fill,
            slots: FxHashMap::default(),
            blocks: Vec::new(),
            updated: Default::default(),
        }
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn voxels_per_side(&self) -> usize {
        self.vps
    }

    pub fn block_edge_length(&self) -> f64 {
        self.voxel_size * self.vps as f64
    }

    pub fn fill(&self) -> V {
        self.fill
    }

    pub fn set_fill(&mut self, fill: V) {
        self.fill = fill;
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Blocks in allocation order.
    pub fn blocks(&self) -> &[Block<V>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block<V>] {
        &mut self.blocks
    }

    pub fn block_indices(&self) -> impl Iterator<Item = BlockIndex> + '_ {
        self.blocks.iter().map(|b| b.index)
    }

    pub fn has_block(&self, index: BlockIndex) -> bool {
        self.slots.contains_key(&index)
    }

    pub fn block(&self, index: BlockIndex) -> Option<&Block<V>> {
        self.slots.get(&index).map(|&s| &self.blocks[s])
    }

    pub fn block_mut(&mut self, index: BlockIndex) -> Option<&mut Block<V>> {
        match self.slots.get(&index) {
            Some(&s) => Some(&mut self.blocks[s]),
            None => None,
        }
    }

    /// Stable slot number of an allocated block.
    #[inline]
    pub fn slot(&self, index: BlockIndex) -> Option<usize> {
        self.slots.get(&index).copied()
    }

    #[inline]
    pub fn block_at(&self, slot: usize) -> &Block<V> {
        &self.blocks[slot]
    }

    #[inline]
    pub fn block_at_mut(&mut self, slot: usize) -> &mut Block<V> {
        &mut self.blocks[slot]
    }

    /// Slot of the block, allocating it (and recording it as updated) if new.
    pub fn allocate_slot(&mut self, index: BlockIndex) -> usize {
        if let Some(&s) = self.slots.get(&index) {
            return s;
        }
        let s = self.blocks.len();
        self.blocks.push(Block::new(index, self.vps, self.fill));
        self.slots.insert(index, s);
        self.mark_updated(index);
        s
    }

    pub fn get_or_allocate_block(&mut self, index: BlockIndex) -> &mut Block<V> {
        let s = self.allocate_slot(index);
        &mut self.blocks[s]
    }

    pub fn voxel(&self, g: GlobalVoxelIndex) -> Option<&V> {
        let (b, l) = split_global_index(g, self.vps);
        self.block(b).map(|blk| blk.voxel(l))
    }

    pub fn voxel_mut(&mut self, g: GlobalVoxelIndex) -> Option<&mut V> {
        let (b, l) = split_global_index(g, self.vps);
        self.block_mut(b).map(|blk| blk.voxel_mut(l))
    }

    pub fn voxel_mut_or_allocate(&mut self, g: GlobalVoxelIndex) -> &mut V {
        let (b, l) = split_global_index(g, self.vps);
        self.get_or_allocate_block(b).voxel_mut(l)
    }

    pub fn voxel_at_point(&self, p: &Point3) -> Option<&V> {
        self.voxel(global_index_from_point(p, self.voxel_size))
    }

    /// `(block slot, linear offset)` of an allocated voxel.
    #[inline]
    pub fn locate(&self, g: GlobalVoxelIndex) -> Option<(usize, usize)> {
        let (b, l) = split_global_index(g, self.vps);
        self.slot(b).map(|s| (s, l.linear(self.vps)))
    }

    /// Iterate every allocated voxel as `(global index, voxel)`.
    pub fn iter_voxels(&self) -> impl Iterator<Item = (GlobalVoxelIndex, &V)> + '_ {
        self.blocks.iter().flat_map(|b| b.iter())
    }

    pub fn mark_updated(&mut self, index: BlockIndex) {
        for set in &mut self.updated {
            set.insert(index);
        }
    }

    pub fn updated_blocks(&self, consumer: UpdateConsumer) -> &FxHashSet<BlockIndex> {
        &self.updated[consumer as usize]
    }

    /// Take the consumer's pending updates, sorted for deterministic processing.
    pub fn drain_updated(&mut self, consumer: UpdateConsumer) -> Vec<BlockIndex> {
        let mut out: Vec<BlockIndex> = self.updated[consumer as usize].drain().collect();
        out.sort_unstable();
        out
    }

    pub fn clear_updated(&mut self) {
        for set in &mut self.updated {
            set.clear();
        }
    }

    /// Insert a fully formed block, replacing any existing one.
    pub(crate) fn insert_block(&mut self, index: BlockIndex, voxels: Vec<V>) {
        debug_assert_eq!(voxels.len(), self.vps * self.vps * self.vps);
        let block = Block {
            index,
            vps: self.vps,
            voxels: voxels.into_boxed_slice(),
        };
        match self.slots.get(&index) {
            Some(&s) => self.blocks[s] = block,
            None => {
                self.slots.insert(index, self.blocks.len());
                self.blocks.push(block);
            }
        }
    }
}

impl<V: Voxel + SdfVoxel> Layer<V> {
    /// Distance of an observed voxel, `None` if unallocated or unobserved.
    pub fn distance(&self, g: GlobalVoxelIndex) -> Option<f64> {
        self.voxel(g)
            .filter(|v| v.is_observed())
            .map(|v| v.distance() as f64)
    }

    /// Trilinear interpolation over the 8 voxel centers surrounding `p`.
    ///
    /// Returns `None` when any of the 8 voxels is unallocated or unobserved.
    pub fn interpolate_distance(&self, p: &Point3) -> Option<f64> {
        let (base, frac) = self.interpolation_cell(p);
        let mut corners = [0.0f64; 8];
        for (i, c) in corners.iter_mut().enumerate() {
            let g = base.offset([(i & 1) as i64, ((i >> 1) & 1) as i64, ((i >> 2) & 1) as i64]);
            *c = self.distance(g)?;
        }
        Some(trilinear(&corners, frac))
    }

    /// Lowest-corner voxel of the interpolation cell around `p` and the
    /// fractional position of `p` inside that cell. Fractions within 1e-9 of
    /// a voxel center snap to it so that centers reproduce voxel values.
    fn interpolation_cell(&self, p: &Point3) -> (GlobalVoxelIndex, [f64; 3]) {
        const SNAP: f64 = 1e-9;
        let s = p / self.voxel_size - Point3::repeat(0.5);
        let mut base = [0i64; 3];
        let mut frac = [0.0; 3];
        for k in 0..3 {
            let mut fl = s[k].floor();
            let mut f = s[k] - fl;
            if f > 1.0 - SNAP {
                fl += 1.0;
                f = 0.0;
            } else if f < SNAP {
                f = 0.0;
            }
            base[k] = fl as i64;
            frac[k] = f;
        }
        (GlobalVoxelIndex::new(base[0], base[1], base[2]), frac)
    }
}

/// Corner `i` sits at offset `(i & 1, (i >> 1) & 1, (i >> 2) & 1)`.
pub(crate) fn trilinear(c: &[f64; 8], f: [f64; 3]) -> f64 {
    let [fx, fy, fz] = f;
    let x00 = c[0] + (c[1] - c[0]) * fx;
    let x10 = c[2] + (c[3] - c[2]) * fx;
    let x01 = c[4] + (c[5] - c[4]) * fx;
    let x11 = c[6] + (c[7] - c[6]) * fx;
    let y0 = x00 + (x10 - x00) * fy;
    let y1 = x01 + (x11 - x01) * fy;
    y0 + (y1 - y0) * fz
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsdf::TsdfVoxel;
    use proptest::prelude::*;

    fn observed(d: f32) -> TsdfVoxel {
        TsdfVoxel {
            distance: d,
            weight: 1.0,
            color: [0; 3],
        }
    }

    fn fill_field(layer: &mut Layer<TsdfVoxel>, range: i64, f: impl Fn(&Point3) -> f64) {
        let v = layer.voxel_size();
        for x in -range..range {
            for y in -range..range {
                for z in -range..range {
                    let g = GlobalVoxelIndex::new(x, y, z);
                    *layer.voxel_mut_or_allocate(g) = observed(f(&g.center(v)) as f32);
                }
            }
        }
    }

    #[test]
    fn unallocated_is_absent() {
        let layer: Layer<TsdfVoxel> = Layer::new(0.1, 16);
        assert!(layer.voxel(GlobalVoxelIndex::new(3, 4, 5)).is_none());
        assert!(layer.interpolate_distance(&Point3::zeros()).is_none());
    }

    #[test]
    fn allocation_defaults_and_idempotence() {
        let mut layer: Layer<TsdfVoxel> = Layer::new(0.1, 8);
        let b = BlockIndex::new(-1, 0, 2);
        layer.get_or_allocate_block(b).voxels_mut()[5].weight = 3.0;
        assert_eq!(layer.num_blocks(), 1);
        // Second allocation returns the same block, contents intact.
        assert_eq!(layer.get_or_allocate_block(b).voxels()[5].weight, 3.0);
        assert_eq!(layer.num_blocks(), 1);
        assert_eq!(layer.block(b).unwrap().voxels()[0].weight, 0.0);
        assert!(layer.updated_blocks(UpdateConsumer::Esdf).contains(&b));
        assert!(layer.updated_blocks(UpdateConsumer::Mesh).contains(&b));
    }

    #[test]
    fn consumers_drain_independently() {
        let mut layer: Layer<TsdfVoxel> = Layer::new(0.1, 8);
        layer.get_or_allocate_block(BlockIndex::new(1, 0, 0));
        layer.get_or_allocate_block(BlockIndex::new(0, 0, 0));
        assert_eq!(
            layer.drain_updated(UpdateConsumer::Esdf),
            vec![BlockIndex::new(0, 0, 0), BlockIndex::new(1, 0, 0)]
        );
        assert!(layer.drain_updated(UpdateConsumer::Esdf).is_empty());
        assert_eq!(layer.drain_updated(UpdateConsumer::Mesh).len(), 2);
    }

    #[test]
    fn interpolation_constant_and_center() {
        let mut layer: Layer<TsdfVoxel> = Layer::new(0.1, 4);
        fill_field(&mut layer, 4, |_| 0.25);
        let d = layer.interpolate_distance(&Point3::new(0.013, -0.07, 0.11)).unwrap();
        assert!((d - 0.25).abs() < 1e-7);

        let mut layer: Layer<TsdfVoxel> = Layer::new(0.1, 4);
        fill_field(&mut layer, 4, |p| p.x * 3.0 - p.z);
        let g = GlobalVoxelIndex::new(1, -2, 0);
        let at = layer.interpolate_distance(&g.center(0.1)).unwrap();
        assert_eq!(at, layer.voxel(g).unwrap().distance as f64);
    }

    #[test]
    fn interpolation_midway_is_mean() {
        let mut layer: Layer<TsdfVoxel> = Layer::new(0.1, 4);
        fill_field(&mut layer, 4, |p| p.x);
        let a = GlobalVoxelIndex::new(0, 0, 0).center(0.1);
        let b = GlobalVoxelIndex::new(1, 0, 0).center(0.1);
        let d = layer.interpolate_distance(&((a + b) / 2.0)).unwrap();
        let expected = (layer.distance(GlobalVoxelIndex::new(0, 0, 0)).unwrap()
            + layer.distance(GlobalVoxelIndex::new(1, 0, 0)).unwrap())
            / 2.0;
        assert!((d - expected).abs() < 1e-9);
    }

    #[test]
    fn interpolation_needs_all_corners_observed() {
        let mut layer: Layer<TsdfVoxel> = Layer::new(0.1, 4);
        fill_field(&mut layer, 4, |_| 0.1);
        layer.voxel_mut(GlobalVoxelIndex::new(0, 0, 0)).unwrap().weight = 0.0;
        assert!(layer.interpolate_distance(&Point3::new(0.05, 0.05, 0.05)).is_none());
        assert!(layer.interpolate_distance(&Point3::new(0.1, 0.1, 0.1)).is_none());
        assert!(layer.interpolate_distance(&Point3::new(0.2, 0.2, 0.2)).is_some());
    }

    proptest! {
        #[test]
        fn trilinear_reproduces_affine(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
                                       off in -0.5f64..0.5,
                                       px in -0.25f64..0.25, py in -0.25f64..0.25, pz in -0.25f64..0.25) {
            let mut layer: Layer<TsdfVoxel> = Layer::new(0.1, 4);
            // Values are stored as f32, so the field is affine only up to f32 rounding.
            fill_field(&mut layer, 4, |p| a * p.x + b * p.y + c * p.z + off);
            let p = Point3::new(px, py, pz);
            let d = layer.interpolate_distance(&p).unwrap();
            let truth = a * px + b * py + c * pz + off;
            prop_assert!((d - truth).abs() < 1e-6);
        }
    }
}
