//! Exact grid traversal: every voxel the segment passes through, in order.

use crate::index::{global_index_from_point, GlobalVoxelIndex};
use crate::Point3;

/// Iterator over the voxels pierced by the segment `start → end`.
///
/// Takes exactly one axis step per iteration, so the walk always ends in the
/// voxel containing `end` after `Σ|Δindex|` steps.
#[derive(Debug, Clone)]
pub struct VoxelTraversal {
    current: GlobalVoxelIndex,
    end: [i64; 3],
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    remaining: u64,
    done: bool,
}

impl VoxelTraversal {
    pub fn new(start: &Point3, end: &Point3, voxel_size: f64) -> Self {
        let start_idx = global_index_from_point(start, voxel_size);
        let end_idx = global_index_from_point(end, voxel_size);
        let a = start / voxel_size;
        let b = end / voxel_size;
        let dir = b - a;
        let s = start_idx.as_array();
        let e = end_idx.as_array();

        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        let mut remaining = 0u64;
        for axis in 0..3 {
            let diff = e[axis] - s[axis];
            remaining += diff.unsigned_abs();
            if diff == 0 || dir[axis] == 0.0 {
                continue;
            }
            step[axis] = diff.signum();
            t_delta[axis] = 1.0 / dir[axis].abs();
            let boundary = if step[axis] > 0 {
                (s[axis] + 1) as f64
            } else {
                s[axis] as f64
            };
            t_max[axis] = (boundary - a[axis]) / dir[axis];
        }
        Self {
            current: start_idx,
            end: e,
            step,
            t_max,
            t_delta,
            remaining,
            done: false,
        }
    }
}

impl Iterator for VoxelTraversal {
    type Item = GlobalVoxelIndex;

    fn next(&mut self) -> Option<GlobalVoxelIndex> {
        if self.done {
            return None;
        }
        let out = self.current;
        if self.remaining == 0 {
            self.done = true;
            return Some(out);
        }
        // Only axes that still owe steps are eligible, so rounding in t_max
        // cannot push the walk past the end voxel.
        let c = self.current.as_array();
        let mut axis = usize::MAX;
        let mut best = f64::INFINITY;
        #[allow(clippy::needless_range_loop)]
        for a in 0..3 {
            if c[a] != self.end[a] && (axis == usize::MAX || self.t_max[a] < best) {
                best = self.t_max[a];
                axis = a;
            }
        }
        let mut next = c;
        next[axis] += self.step[axis];
        self.t_max[axis] += self.t_delta[axis];
        self.current = GlobalVoxelIndex::new(next[0], next[1], next[2]);
        self.remaining -= 1;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    /// Voxels hit by dense sampling of the segment.
    fn sampled(a: &Point3, b: &Point3, v: f64) -> HashSet<GlobalVoxelIndex> {
        let n = 200_000;
        (0..=n)
            .map(|i| global_index_from_point(&(a + (b - a) * (i as f64 / n as f64)), v))
            .collect()
    }

    /// Does the segment intersect the (slightly inflated) voxel box?
    fn pierces(a: &Point3, b: &Point3, g: GlobalVoxelIndex, v: f64) -> bool {
        let lo = g.as_array().map(|c| c as f64 * v - 1e-9);
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..3 {
            let hi = lo[k] + v + 2e-9;
            if d[k].abs() < 1e-15 {
                if a[k] < lo[k] || a[k] > hi {
                    return false;
                }
                continue;
            }
            let (mut ta, mut tb) = ((lo[k] - a[k]) / d[k], (hi - a[k]) / d[k]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        t0 <= t1
    }

    #[test]
    fn straight_ray_along_axis() {
        let walk: Vec<_> =
            VoxelTraversal::new(&Point3::new(0.05, 0.05, 0.05), &Point3::new(0.05, 0.05, 1.45), 0.1)
                .collect();
        assert_eq!(walk.len(), 15);
        for (i, g) in walk.iter().enumerate() {
            assert_eq!(*g, GlobalVoxelIndex::new(0, 0, i as i64));
        }
    }

    #[test]
    fn single_voxel_segment() {
        let walk: Vec<_> =
            VoxelTraversal::new(&Point3::new(0.01, 0.02, 0.03), &Point3::new(0.05, 0.06, 0.07), 0.1)
                .collect();
        assert_eq!(walk, vec![GlobalVoxelIndex::new(0, 0, 0)]);
    }

    #[test]
    fn random_segments_match_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let v = rng.random_range(0.05..0.3);
            let a = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let b = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let walk: Vec<_> = VoxelTraversal::new(&a, &b, v).collect();
            let set: HashSet<_> = walk.iter().copied().collect();
            assert_eq!(set.len(), walk.len(), "voxel visited twice");
            assert_eq!(walk[0], global_index_from_point(&a, v));
            assert_eq!(*walk.last().unwrap(), global_index_from_point(&b, v));
            for g in sampled(&a, &b, v) {
                assert!(set.contains(&g), "missed {g:?}");
            }
            for g in &walk {
                assert!(pierces(&a, &b, *g, v), "{g:?} not on segment");
            }
            // Consecutive voxels are face neighbors.
            for w in walk.windows(2) {
                let d = w[1] - w[0];
                assert_eq!(d.iter().map(|c| c.abs()).sum::<i64>(), 1);
            }
        }
    }
}
