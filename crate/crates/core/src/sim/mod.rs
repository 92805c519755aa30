//! Analytic worlds with exact signed distance, used as ground truth.

mod camera;

pub use camera::{render_depth, sample_viewpoints, Camera};

use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::esdf::EsdfVoxel;
use crate::index::{global_index_from_point, BlockIndex, GlobalVoxelIndex};
use crate::layer::Layer;
use crate::Point3;

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Half-space with signed distance `n·p − offset`; `n` is unit length.
    Plane { normal: Point3, offset: f64 },
    Sphere { center: Point3, radius: f64 },
    /// Axis-aligned box.
    Box { center: Point3, half_extents: Point3 },
}

impl Primitive {
    pub fn plane(normal: Point3, offset: f64) -> Result<Self> {
        let n = normal
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Config("plane normal must be nonzero".into()))?;
        Ok(Primitive::Plane { normal: n, offset })
    }

    pub fn sphere(center: Point3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(Primitive::Sphere { center, radius })
    }

    pub fn cuboid(center: Point3, half_extents: Point3) -> Result<Self> {
        if !half_extents.iter().all(|h| *h > 0.0) {
            return Err(Error::Config("box half-extents must be positive".into()));
        }
        Ok(Primitive::Box { center, half_extents })
    }

    pub fn sdf(&self, p: &Point3) -> f64 {
        match self {
            Primitive::Plane { normal, offset } => normal.dot(p) - offset,
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
            Primitive::Box { center, half_extents } => {
                let q = (p - center).abs() - half_extents;
                let outside = q.map(|c| c.max(0.0)).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Plane { normal: n, offset } => {
                write!(f, "plane {} {} {} {}", n.x, n.y, n.z, offset)
            }
            Primitive::Sphere { center: c, radius } => {
                write!(f, "sphere {} {} {} {}", c.x, c.y, c.z, radius)
            }
            Primitive::Box { center: c, half_extents: h } => {
                write!(f, "box {} {} {} {} {} {}", c.x, c.y, c.z, h.x, h.y, h.z)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point3,
    pub max: Point3,
}

impl Bounds {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if !(0..3).all(|i| min[i] < max[i]) {
            return Err(Error::Config("bounds min must be below max on every axis".into()));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub bounds: Bounds,
    pub primitives: Vec<Primitive>,
}

const DEFAULT_WORLD: &str = include_str!("../../worlds/default.world");

impl World {
    pub fn new(bounds: Bounds, primitives: Vec<Primitive>) -> Self {
        Self { bounds, primitives }
    }

    /// The benchmark world shipped in `worlds/default.world`.
    pub fn default_world() -> Self {
        Self::parse(DEFAULT_WORLD).expect("built-in world parses")
    }

    /// Minimum signed distance over all primitives; `+inf` for an empty world.
    pub fn sdf(&self, p: &Point3) -> f64 {
        self.primitives
            .iter()
            .map(|s| s.sdf(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parse the line-based world format. See `worlds/default.world`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut bounds = None;
        let mut primitives = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap();
            let nums: Vec<f64> = words
                .map(|w| w.parse::<f64>().map_err(|_| err(format!("not a number: {w:?}"))))
                .collect::<Result<_>>()?;
            if nums.iter().any(|x| !x.is_finite()) {
                return Err(err("non-finite value".into()));
            }
            let want = |n: usize| {
                if nums.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("{keyword} takes {n} numbers, got {}", nums.len())))
                }
            };
            let v3 = |k: usize| Point3::new(nums[k], nums[k + 1], nums[k + 2]);
            let config = |e: Error| match e {
                Error::Config(m) => err(m),
                other => other,
            };
            match keyword {
                "bounds" => {
                    want(6)?;
                    if bounds.is_some() {
                        return Err(err("bounds given twice".into()));
                    }
                    bounds = Some(Bounds::new(v3(0), v3(3)).map_err(config)?);
                }
                "plane" => {
                    want(4)?;
                    primitives.push(Primitive::plane(v3(0), nums[3]).map_err(config)?);
                }
                "sphere" => {
                    want(4)?;
                    primitives.push(Primitive::sphere(v3(0), nums[3]).map_err(config)?);
                }
                "box" => {
                    want(6)?;
                    primitives.push(Primitive::cuboid(v3(0), v3(3)).map_err(config)?);
                }
                other => return Err(err(format!("unknown primitive {other:?}"))),
            }
        }
        let bounds = bounds.ok_or(Error::Parse {
            line: 0,
            msg: "missing bounds line".into(),
        })?;
        Ok(Self { bounds, primitives })
    }

    /// Points on the visible surface of the world, roughly `spacing` apart:
    /// samples on every primitive that lie inside the bounds and are not
    /// buried inside another primitive.
    pub fn sample_surface(&self, spacing: f64) -> Vec<Point3> {
        let mut raw = Vec::new();
        let b = &self.bounds;
        for prim in &self.primitives {
            match prim {
                Primitive::Plane { normal, offset } => {
                    // Grid over the bounds' face most aligned with the plane,
                    // projected onto the plane along the dominant axis.
                    let axis = normal.iamax();
                    let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
                    for su in grid(b.min[u], b.max[u], spacing) {
                        for sw in grid(b.min[w], b.max[w], spacing) {
                            let mut p = Point3::zeros();
                            p[u] = su;
                            p[w] = sw;
                            p[axis] = (offset - normal[u] * su - normal[w] * sw) / normal[axis];
                            raw.push(p);
                        }
                    }
                }
                Primitive::Sphere { center, radius } => {
                    let area = 4.0 * std::f64::consts::PI * radius * radius;
                    let n = (area / (spacing * spacing)).ceil().max(1.0) as usize;
                    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                    for i in 0..n {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * i as f64;
                        raw.push(center + Point3::new(r * phi.cos(), r * phi.sin(), z) * *radius);
                    }
                }
                Primitive::Box { center, half_extents: h } => {
                    for axis in 0..3 {
                        let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
                        for side in [-1.0, 1.0] {
                            for su in grid(-h[u], h[u], spacing) {
                                for sw in grid(-h[w], h[w], spacing) {
                                    let mut p = *center;
                                    p[axis] += side * h[axis];
                                    p[u] += su;
                                    p[w] += sw;
                                    raw.push(p);
                                }
                            }
                        }
                    }
                }
            }
        }
        raw.retain(|p| b.contains(p) && self.sdf(p).abs() < 1e-6);
        raw
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = (self.bounds.min, self.bounds.max);
        writeln!(f, "bounds {} {} {} {} {} {}", a.x, a.y, a.z, b.x, b.y, b.z)?;
        for p in &self.primitives {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Cell-centered samples covering `[lo, hi]`.
fn grid(lo: f64, hi: f64, spacing: f64) -> impl Iterator<Item = f64> {
    let n = ((hi - lo) / spacing).ceil().max(1.0) as usize;
    let step = (hi - lo) / n as f64;
    (0..n).map(move |i| lo + (i as f64 + 0.5) * step)
}

/// Blocks intersecting the world bounds.
pub fn blocks_in_bounds(bounds: &Bounds, voxel_size: f64, vps: usize) -> Vec<BlockIndex> {
    let lo = global_index_from_point(&bounds.min, voxel_size);
    // Treat the upper bound as exclusive so exact multiples do not add a shell.
    let hi_p = bounds.max.map(|c| c - voxel_size * 1e-9);
    let hi = global_index_from_point(&hi_p, voxel_size);
    let (blo, _) = crate::index::split_global_index(lo, vps);
    let (bhi, _) = crate::index::split_global_index(hi, vps);
    let mut out = Vec::new();
    for x in blo.x..=bhi.x {
        for y in blo.y..=bhi.y {
            for z in blo.z..=bhi.z {
                out.push(BlockIndex::new(x, y, z));
            }
        }
    }
    out
}

/// Exact clamped SDF at every voxel center of the given blocks.
pub fn ground_truth_esdf_blocks(
    world: &World,
    blocks: &[BlockIndex],
    voxel_size: f64,
    vps: usize,
    d_max: f64,
) -> Layer<EsdfVoxel> {
    let fill = EsdfVoxel::unobserved(d_max);
    let filled: Vec<(BlockIndex, Vec<EsdfVoxel>)> = blocks
        .par_iter()
        .map(|&b| {
            let first = b.first_voxel(vps);
            let n = vps * vps * vps;
            let voxels = (0..n)
                .map(|i| {
                    let l = crate::index::LocalVoxelIndex::from_linear(i, vps);
                    let g = GlobalVoxelIndex::new(
                        first.x + l.x as i64,
                        first.y + l.y as i64,
                        first.z + l.z as i64,
                    );
                    let d = world.sdf(&g.center(voxel_size)).clamp(-d_max, d_max);
                    EsdfVoxel {
                        distance: d as f32,
                        observed: true,
                        ..fill
                    }
                })
                .collect();
            (b, voxels)
        })
        .collect();
    let mut layer = Layer::with_fill(voxel_size, vps, fill);
    for (b, v) in filled {
        layer.insert_block(b, v);
    }
    layer
}

/// Ground-truth ESDF over every block intersecting the world bounds.
pub fn ground_truth_esdf(world: &World, voxel_size: f64, vps: usize, d_max: f64) -> Layer<EsdfVoxel> {
    let blocks = blocks_in_bounds(&world.bounds, voxel_size, vps);
    ground_truth_esdf_blocks(world, &blocks, voxel_size, vps, d_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_distances() {
        let s = Primitive::sphere(Point3::zeros(), 1.0).unwrap();
        assert_eq!(s.sdf(&Point3::new(2.0, 0.0, 0.0)), 1.0);
        let p = Primitive::plane(Point3::new(0.0, 0.0, 2.0), 1.0).unwrap();
        assert_eq!(p.sdf(&Point3::new(3.0, -4.0, 1.0)), 0.0);
        let b = Primitive::cuboid(Point3::zeros(), Point3::new(1.0, 1.0, 1.0)).unwrap();
        assert!((b.sdf(&Point3::new(2.0, 2.0, 0.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(b.sdf(&Point3::new(0.5, 0.0, 0.0)), -0.5);
        assert_eq!(b.sdf(&Point3::new(0.0, 3.0, 0.0)), 2.0);
    }

    #[test]
    fn default_world_round_trips_through_text() {
        let w = World::default_world();
        assert_eq!(w.primitives.len(), 5);
        assert_eq!(World::parse(&w.to_string()).unwrap(), w);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = World::parse("bounds 0 0 0 1 1 1\nsphere 0 0 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = World::parse("bounds 0 0 0 1 1 1\n\n  cone 1 2 3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(World::parse("sphere 0 0 0 1\n").is_err());
        assert!(World::parse("bounds 0 0 0 1 1 1\nsphere 0 0 0 -1\n").is_err());
        assert!(World::parse("bounds 0 0 0 1 1 1\nsphere 0 0 0 x\n").is_err());
    }

    #[test]
    fn surface_samples_lie_on_the_surface() {
        let w = World::default_world();
        let pts = w.sample_surface(0.2);
        assert!(pts.len() > 1000);
        for p in &pts {
            assert!(w.sdf(p).abs() < 1e-6);
            assert!(w.bounds.contains(p));
        }
    }

    #[test]
    fn ground_truth_matches_sdf() {
        let w = World::default_world();
        let gt = ground_truth_esdf(&w, 0.25, 8, 2.0);
        // Voxels -20..20 in x and y span blocks -3..=2; 0..40 in z spans 0..=4.
        assert_eq!(gt.num_blocks(), 6 * 6 * 5);
        for (g, vox) in gt.iter_voxels().step_by(97) {
            let want = w.sdf(&g.center(0.25)).clamp(-2.0, 2.0) as f32;
            assert_eq!(vox.distance, want);
            assert!(vox.observed);
        }
    }
}
