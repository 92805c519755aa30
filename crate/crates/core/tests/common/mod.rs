#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdfmap::index::NEIGHBOR_OFFSETS;
use sdfmap::{EsdfVoxel, GlobalVoxelIndex, Layer, Point3, TsdfVoxel};

/// Dense TSDF over `[0, n)³` from an analytic field, truncated to `±trunc`.
/// Voxels for which `observed` returns false keep zero weight.
pub fn tsdf_from_field(
    v: f64,
    vps: usize,
    n: i64,
    trunc: f64,
    field: impl Fn(&Point3) -> f64,
    observed: impl Fn(GlobalVoxelIndex) -> bool,
) -> Layer<TsdfVoxel> {
    let mut layer: Layer<TsdfVoxel> = Layer::new(v, vps);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let g = GlobalVoxelIndex::new(x, y, z);
                let vox = layer.voxel_mut_or_allocate(g);
                if observed(g) {
                    vox.distance = field(&g.center(v)).clamp(-trunc, trunc) as f32;
                    vox.weight = 1.0;
                }
            }
        }
    }
    layer
}

/// Random union of spheres inside a cube of side `n·v`, with a random
/// fraction of voxels left unobserved.
pub struct RandomScene {
    pub spheres: Vec<(Point3, f64)>,
    pub holes: f64,
    pub seed: u64,
}

impl RandomScene {
    pub fn new(seed: u64, n: i64, v: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = n as f64 * v;
        let k = rng.random_range(1..=4);
        let spheres = (0..k)
            .map(|_| {
                let c = Point3::from_fn(|_, _| rng.random_range(0.1 * side..0.9 * side));
                (c, rng.random_range(0.1 * side..0.3 * side))
            })
            .collect();
        Self {
            spheres,
            holes: rng.random_range(0.0..0.15),
            seed,
        }
    }

    pub fn sdf(&self, p: &Point3) -> f64 {
        self.spheres
            .iter()
            .map(|(c, r)| (p - c).norm() - r)
            .fold(f64::INFINITY, f64::min)
    }

    /// Deterministic per-voxel hole pattern.
    pub fn observed(&self, g: GlobalVoxelIndex) -> bool {
        let h = (g.x.wrapping_mul(73856093) ^ g.y.wrapping_mul(19349663) ^ g.z.wrapping_mul(83492791))
            as u64
            ^ self.seed.wrapping_mul(0x9e3779b97f4a7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        rng.random::<f64>() >= self.holes
    }

    pub fn tsdf(&self, v: f64, vps: usize, n: i64, trunc: f64) -> Layer<TsdfVoxel> {
        tsdf_from_field(v, vps, n, trunc, |p| self.sdf(p), |g| self.observed(g))
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Entry(f64, GlobalVoxelIndex);

impl Eq for Entry {}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0)
    }
}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Shortest-path distances over the 26-connected grid of observed TSDF
/// voxels. Fixed voxels (`|d| < gamma`) are sources holding their own value;
/// edges lead only into free voxels, with costs `v`, `√2·v`, `√3·v`. Free
/// voxels extend paths on their own side of the surface; a fixed voxel with
/// value `d` also offers `d ∓ step` to a free neighbor across the surface
/// when that keeps the neighbor's sign. Results are capped at `d_max` in
/// magnitude. Values are `(signed distance, is_fixed)`.
pub fn dijkstra_oracle(
    tsdf: &Layer<TsdfVoxel>,
    gamma: f64,
    d_max: f64,
) -> HashMap<GlobalVoxelIndex, (f64, bool)> {
    let v = tsdf.voxel_size();
    let mut sign: HashMap<GlobalVoxelIndex, bool> = HashMap::new();
    let mut out = HashMap::new();
    // Positive and negative sides are independent problems; track magnitude.
    let mut best: HashMap<GlobalVoxelIndex, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    for (g, t) in tsdf.iter_voxels() {
        if !t.observed() {
            continue;
        }
        let d = t.distance as f64;
        let positive = d >= 0.0;
        sign.insert(g, positive);
        if d.abs() < gamma {
            out.insert(g, (d, true));
            heap.push(Entry(d.abs(), g));
            best.insert(g, d.abs());
        }
    }
    // Seeds across the surface, as magnitudes on the neighbor's side.
    let fixed: Vec<(GlobalVoxelIndex, f64)> = out.iter().map(|(g, (d, _))| (*g, *d)).collect();
    for (g, d) in fixed {
        for off in NEIGHBOR_OFFSETS {
            let n = g.offset(off);
            let Some(&np) = sign.get(&n) else { continue };
            if np == (d >= 0.0) || out.contains_key(&n) {
                continue;
            }
            let step = sdfmap::index::step_length(off) * v;
            let (valid, mag) = if np { (d + step >= 0.0, d + step) } else { (d - step < 0.0, step - d) };
            if valid && best.get(&n).is_none_or(|b| mag < *b) {
                best.insert(n, mag);
                heap.push(Entry(mag, n));
            }
        }
    }
    while let Some(Entry(dist, g)) = heap.pop() {
        if dist > best[&g] || dist >= d_max {
            continue;
        }
        let positive = sign[&g];
        for off in NEIGHBOR_OFFSETS {
            let n = g.offset(off);
            let Some(&np) = sign.get(&n) else { continue };
            if np != positive || out.get(&n).is_some_and(|(_, f)| *f) {
                continue;
            }
            let cand = dist + sdfmap::index::step_length(off) * v;
            if best.get(&n).is_none_or(|b| cand < *b) {
                best.insert(n, cand);
                heap.push(Entry(cand, n));
            }
        }
    }
    for (g, positive) in &sign {
        if out.contains_key(g) {
            continue;
        }
        let m = best.get(g).copied().unwrap_or(d_max).min(d_max);
        out.insert(*g, (if *positive { m } else { -m }, false));
    }
    out
}

/// Largest |esdf − oracle| over all oracle voxels; panics if the ESDF is
/// missing a voxel or disagrees on the fixed flag.
pub fn max_oracle_error(esdf: &Layer<EsdfVoxel>, oracle: &HashMap<GlobalVoxelIndex, (f64, bool)>) -> f64 {
    let mut worst: f64 = 0.0;
    for (g, (d, fixed)) in oracle {
        let e = esdf.voxel(*g).unwrap_or_else(|| panic!("missing voxel {g:?}"));
        assert!(e.observed, "voxel {g:?} not observed");
        assert_eq!(e.fixed, *fixed, "fixed flag at {g:?}");
        worst = worst.max((e.distance as f64 - d).abs());
    }
    worst
}

/// Bitwise equality of distance and flags on every voxel of either layer.
pub fn assert_layers_equal(a: &Layer<EsdfVoxel>, b: &Layer<EsdfVoxel>) {
    let mut n = 0;
    for (g, va) in a.iter_voxels() {
        let vb = b.voxel(g).copied().unwrap_or(b.fill());
        assert_eq!(va.observed, vb.observed, "observed at {g:?}");
        if va.observed {
            assert_eq!(va.distance.to_bits(), vb.distance.to_bits(), "distance at {g:?}: {} vs {}", va.distance, vb.distance);
            assert_eq!(va.fixed, vb.fixed, "fixed at {g:?}");
            n += 1;
        }
    }
    for (g, vb) in b.iter_voxels() {
        if vb.observed {
            assert!(a.voxel(g).is_some_and(|v| v.observed), "observed only in second layer at {g:?}");
        }
    }
    assert!(n > 0 || a.iter_voxels().all(|(_, v)| !v.observed));
}
