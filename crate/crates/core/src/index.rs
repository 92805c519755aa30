//! Integer grid coordinates and the block/local decomposition.
//!
//! Voxel `i` along an axis covers `[i·v, (i+1)·v)` and has its center at
//! `(i + 0.5)·v`. Negative coordinates decompose with floor semantics, so
//! global voxel `-1` lives in block `-1` at local position `vps - 1`.

use std::ops::{Add, Sub};

use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GlobalVoxelIndex {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BlockIndex {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

/// Position of a voxel inside its block; every component is in `[0, vps)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LocalVoxelIndex {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl GlobalVoxelIndex {
    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        Self { x, y, z }
    }

    pub fn from_point(p: &Point3, voxel_size: f64) -> Self {
        global_index_from_point(p, voxel_size)
    }

    /// Center of this voxel in meters.
    pub fn center(&self, voxel_size: f64) -> Point3 {
        Point3::new(
            (self.x as f64 + 0.5) * voxel_size,
            (self.y as f64 + 0.5) * voxel_size,
            (self.z as f64 + 0.5) * voxel_size,
        )
    }

    pub fn offset(&self, d: [i64; 3]) -> Self {
        Self::new(self.x + d[0], self.y + d[1], self.z + d[2])
    }

    pub fn as_array(&self) -> [i64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add<[i64; 3]> for GlobalVoxelIndex {
    type Output = GlobalVoxelIndex;
    fn add(self, d: [i64; 3]) -> Self {
        self.offset(d)
    }
}

impl Sub for GlobalVoxelIndex {
    type Output = [i64; 3];
    fn sub(self, rhs: Self) -> [i64; 3] {
        [self.x - rhs.x, self.y - rhs.y, self.z - rhs.z]
    }
}

impl BlockIndex {
    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        Self { x, y, z }
    }

    pub fn offset(&self, d: [i64; 3]) -> Self {
        Self::new(self.x + d[0], self.y + d[1], self.z + d[2])
    }

    /// Global index of the block's first voxel.
    pub fn first_voxel(&self, vps: usize) -> GlobalVoxelIndex {
        let n = vps as i64;
        GlobalVoxelIndex::new(self.x * n, self.y * n, self.z * n)
    }
}

impl LocalVoxelIndex {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    /// Linear offset into a block's voxel array, x fastest.
    #[inline]
    pub fn linear(&self, vps: usize) -> usize {
        self.x + vps * (self.y + vps * self.z)
    }

    #[inline]
    pub fn from_linear(i: usize, vps: usize) -> Self {
        Self::new(i % vps, (i / vps) % vps, i / (vps * vps))
    }
}

/// `floor(p / v)` per axis.
pub fn global_index_from_point(p: &Point3, voxel_size: f64) -> GlobalVoxelIndex {
    debug_assert!(voxel_size > 0.0);
    GlobalVoxelIndex::new(
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

pub fn split_global_index(g: GlobalVoxelIndex, vps: usize) -> (BlockIndex, LocalVoxelIndex) {
    debug_assert!(vps >= 1);
    let n = vps as i64;
    let block = BlockIndex::new(g.x.div_euclid(n), g.y.div_euclid(n), g.z.div_euclid(n));
    let local = LocalVoxelIndex::new(
        g.x.rem_euclid(n) as usize,
        g.y.rem_euclid(n) as usize,
        g.z.rem_euclid(n) as usize,
    );
    (block, local)
}

pub fn join_global_index(block: BlockIndex, local: LocalVoxelIndex, vps: usize) -> GlobalVoxelIndex {
    block.first_voxel(vps).offset([local.x as i64, local.y as i64, local.z as i64])
}

/// The 26 neighbor offsets of a voxel, faces first, then edges, then corners.
pub const NEIGHBOR_OFFSETS: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut ring = 1;
    while ring <= 3 {
        let mut z = -1;
        while z <= 1 {
            let mut y = -1;
            while y <= 1 {
                let mut x = -1;
                while x <= 1 {
                    let nonzero = (x != 0) as i32 + (y != 0) as i32 + (z != 0) as i32;
                    if nonzero == ring {
                        out[n] = [x, y, z];
                        n += 1;
                    }
                    x += 1;
                }
                y += 1;
            }
            z += 1;
        }
        ring += 1;
    }
    out
};

/// Length in voxel units of a unit grid step with `nonzero` moving axes.
pub fn step_length(offset: [i64; 3]) -> f64 {
    let sq = offset[0] * offset[0] + offset[1] * offset[1] + offset[2] * offset[2];
    (sq as f64).sqrt()
}
