use nalgebra::{Quaternion, Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::World;
use crate::error::{Error, Result};
use crate::tsdf::Scan;
use crate::{Point3, Pose};

const HIT_EPSILON: f64 = 1e-6;
const MAX_MARCH_STEPS: usize = 4096;
const SAMPLING_BUDGET: usize = 1_000_000;

/// Pinhole depth camera. The optical frame looks along +z with x to the
/// right and y down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub max_range: f64,
}

impl Default for Camera {
    /// 320×240 with a 90° horizontal field of view and 5 m range.
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            fx: 160.0,
            fy: 160.0,
            cx: 160.0,
            cy: 120.0,
            max_range: 5.0,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config("focal lengths must be positive".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::Config("max range must be positive".into()));
        }
        Ok(())
    }

    /// Unit ray through the center of pixel (u, v), in the sensor frame.
    pub fn ray(&self, u: usize, v: usize) -> Point3 {
        Point3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
        .normalize()
    }
}

/// First surface hit along `dir` from `origin` within `max_range`.
pub fn sphere_trace(world: &World, origin: &Point3, dir: &Point3, max_range: f64) -> Option<f64> {
    let mut t = 0.0;
    for _ in 0..MAX_MARCH_STEPS {
        let s = world.sdf(&(origin + dir * t));
        if s < HIT_EPSILON {
            return (s > -HIT_EPSILON && t > 0.0).then_some(t);
        }
        t += s;
        if t > max_range {
            return None;
        }
    }
    None
}

/// Render a noiseless scan: one point per pixel whose ray hits the world,
/// expressed in the sensor frame.
pub fn render_depth(world: &World, pose: &Pose, camera: &Camera) -> Scan {
    let origin = pose.translation.vector;
    let rows: Vec<Vec<Point3>> = (0..camera.height)
        .into_par_iter()
        .map(|v| {
            (0..camera.width)
                .filter_map(|u| {
                    let d = camera.ray(u, v);
                    let dw = pose.rotation * d;
                    sphere_trace(world, &origin, &dw, camera.max_range).map(|t| d * t)
                })
                .collect()
        })
        .collect();
    Scan::new(rows.into_iter().flatten().collect(), *pose)
}

/// Uniformly random rotation.
pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    UnitQuaternion::from_quaternion(Quaternion::new(
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    ))
}

/// `n` poses with uniformly random position inside the world bounds at least
/// `min_clearance` from every surface, and uniformly random orientation.
pub fn sample_viewpoints(world: &World, n: usize, min_clearance: f64, seed: u64) -> Result<Vec<Pose>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = world.bounds;
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts == SAMPLING_BUDGET {
            return Err(Error::SamplingFailed {
                attempts,
                accepted: out.len(),
                requested: n,
            });
        }
        attempts += 1;
        let p = Point3::from_fn(|i, _| rng.random_range(b.min[i]..b.max[i]));
        if world.sdf(&p) >= min_clearance {
            let q = random_rotation(&mut rng);
            out.push(Pose::from_parts(Translation3::from(p), q));
        }
    }
    Ok(out)
}
