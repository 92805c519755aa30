//! Sampled error of merging several projective observations of one voxel.
//!
//! A voxel at true distance `x` behind the surface normal is observed along
//! rays with incidence angle `θ` uniform on `[π/20, π/2]`. Each ray reports
//! the projective distance `x / sin θ`, truncated to `δ`, and the
//! observations are merged by the weighted mean. For every `x` on a grid over
//! `[0, δ]` the absolute merged error is collected over all trials; the
//! reported quantile is the worst one over the grid, so it bounds the error
//! of a voxel anywhere inside the truncation band.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::MIN_INCIDENCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObservationWeighting {
    /// Every observation has weight 1.
    #[default]
    Unit,
    /// Weight `sin² θ`, i.e. inverse square of the ray length to a voxel at
    /// fixed normal distance.
    InverseSquare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub n_obs: usize,
    pub trials: usize,
    pub truncation: f64,
    pub seed: u64,
    pub weighting: ObservationWeighting,
    /// Number of intervals in the grid of true distances over `[0, δ]`.
    pub distance_steps: usize,
    pub quantiles: Vec<f64>,
}

impl MonteCarloConfig {
    pub fn new(n_obs: usize, trials: usize, truncation: f64, seed: u64) -> Self {
        Self {
            n_obs,
            trials,
            truncation,
            seed,
            weighting: ObservationWeighting::Unit,
            distance_steps: 50,
            quantiles: vec![0.5, 0.9, 0.95, 0.99],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub n_obs: usize,
    pub trials: usize,
    /// `(q, e)`: the `q` quantile of `|error|`, as a fraction of `δ`,
    /// maximized over true distance.
    pub quantiles: Vec<(f64, f64)>,
    /// Largest error seen in any trial, as a fraction of `δ`.
    pub max: f64,
}

impl MonteCarloResult {
    pub fn quantile(&self, q: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|(p, _)| (p - q).abs() < 1e-12)
            .map(|(_, e)| *e)
    }
}

/// Sample quantile with linear interpolation between order statistics.
fn quantile_in_place(xs: &mut [f64], q: f64) -> f64 {
    let pos = q * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, a, rest) = xs.select_nth_unstable_by(lo, f64::total_cmp);
    let a = *a;
    if frac == 0.0 || rest.is_empty() {
        return a;
    }
    let b = rest.iter().copied().fold(f64::INFINITY, f64::min);
    a + frac * (b - a)
}

pub fn monte_carlo_merged_error(config: &MonteCarloConfig) -> MonteCarloResult {
    let n = config.n_obs.max(1);
    let trials = config.trials.max(1);
    let delta = config.truncation;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Per observation: 1/sin θ and its weight.
    let draws: Vec<(f64, f64)> = (0..n * trials)
        .map(|_| {
            let theta = rng.random_range(MIN_INCIDENCE..=std::f64::consts::FRAC_PI_2);
            let s = theta.sin();
            let w = match config.weighting {
                ObservationWeighting::Unit => 1.0,
                ObservationWeighting::InverseSquare => s * s,
            };
            (1.0 / s, w)
        })
        .collect();

    let steps = config.distance_steps.max(1);
    let per_distance: Vec<(Vec<f64>, f64)> = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let x = delta * k as f64 / steps as f64;
            let mut errs: Vec<f64> = draws
                .chunks_exact(n)
                .map(|obs| {
                    let (mut num, mut den) = (0.0, 0.0);
                    for &(inv_sin, w) in obs {
                        num += w * (x * inv_sin).min(delta);
                        den += w;
                    }
                    (num / den - x).abs() / delta
                })
                .collect();
            let max = errs.iter().copied().fold(0.0, f64::max);
            let qs = config
                .quantiles
                .iter()
                .map(|&q| quantile_in_place(&mut errs, q))
                .collect();
            (qs, max)
        })
        .collect();

    let quantiles = config
        .quantiles
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let worst = per_distance.iter().map(|(qs, _)| qs[i]).fold(0.0, f64::max);
            (q, worst)
        })
        .collect();
    MonteCarloResult {
        n_obs: n,
        trials,
        quantiles,
        max: per_distance.iter().map(|(_, m)| *m).fold(0.0, f64::max),
    }
}
