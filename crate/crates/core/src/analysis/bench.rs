//! Simulation benchmark: render scans of an analytic world, integrate them,
//! build ESDF variants and compare everything against ground truth.

use std::io::Write;
use std::time::{Duration, Instant};

use super::{esdf_error, surface_error, ErrorStats};
use crate::error::Result;
use crate::esdf::{check_invariants, EsdfConfig, EsdfIntegrator, EsdfVoxel, FixedBand, Metric, QueueMode};
use crate::layer::{Layer, UpdateConsumer};
use crate::sim::{blocks_in_bounds, ground_truth_esdf_blocks, render_depth, sample_viewpoints, Camera, World};
use crate::tsdf::{Scan, TsdfConfig, TsdfIntegrator, TsdfVoxel};

/// How an ESDF is derived from the TSDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsdfVariant {
    Band { band: FixedBand, metric: Metric },
    /// Negative TSDF voxels become zero-distance obstacles.
    Occupancy,
}

impl EsdfVariant {
    pub fn name(&self) -> String {
        match self {
            EsdfVariant::Band { band, metric } => {
                let b = match band {
                    FixedBand::OneVoxel => "one_voxel",
                    FixedBand::HalfTruncation => "half_trunc",
                };
                let m = match metric {
                    Metric::QuasiEuclidean => "quasi",
                    Metric::Euclidean => "euclid",
                };
                format!("{b}_{m}")
            }
            EsdfVariant::Occupancy => "occupancy".into(),
        }
    }

    /// The variants compared by the benchmark by default.
    pub fn standard() -> Vec<EsdfVariant> {
        vec![
            EsdfVariant::Band {
                band: FixedBand::OneVoxel,
                metric: Metric::QuasiEuclidean,
            },
            EsdfVariant::Band {
                band: FixedBand::HalfTruncation,
                metric: Metric::QuasiEuclidean,
            },
            EsdfVariant::Band {
                band: FixedBand::OneVoxel,
                metric: Metric::Euclidean,
            },
            EsdfVariant::Band {
                band: FixedBand::HalfTruncation,
                metric: Metric::Euclidean,
            },
            EsdfVariant::Occupancy,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimBenchConfig {
    pub voxel_size: f64,
    pub voxels_per_side: usize,
    pub tsdf: TsdfConfig,
    pub d_max: f64,
    pub queue_mode: QueueMode,
    pub variants: Vec<EsdfVariant>,
    /// Maintain band variants incrementally after every scan instead of one
    /// batch build at the end.
    pub incremental: bool,
    /// Check ESDF invariants after every incremental update.
    pub check_invariants: bool,
    /// Spacing of ground-truth surface samples.
    pub surface_spacing: f64,
}

impl SimBenchConfig {
    pub fn new(voxel_size: f64) -> Self {
        Self {
            voxel_size,
            voxels_per_side: crate::layer::DEFAULT_VOXELS_PER_SIDE,
            tsdf: TsdfConfig::for_voxel_size(voxel_size),
            d_max: 4.0,
            queue_mode: QueueMode::PrioritySingleInsert,
            variants: EsdfVariant::standard(),
            incremental: false,
            check_invariants: false,
            surface_spacing: 0.05,
        }
    }

    fn esdf_config(&self, variant: EsdfVariant) -> EsdfConfig {
        let (band, metric) = match variant {
            EsdfVariant::Band { band, metric } => (band, metric),
            EsdfVariant::Occupancy => (FixedBand::OneVoxel, Metric::QuasiEuclidean),
        };
        EsdfConfig {
            d_max: self.d_max,
            fixed_band: band,
            metric,
            queue_mode: self.queue_mode,
            bucket_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantReport {
    pub name: String,
    pub error: ErrorStats,
    /// Batch build time, or the sum of incremental update times.
    pub build_time: Duration,
    pub update_times: Vec<Duration>,
    pub invariant_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimBenchReport {
    pub voxel_size: f64,
    pub scans: usize,
    pub tsdf_blocks: usize,
    pub insert_times: Vec<Duration>,
    pub surface: ErrorStats,
    pub variants: Vec<VariantReport>,
}

impl SimBenchReport {
    pub fn variant(&self, name: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.name == name)
    }

    pub const CSV_HEADER: &'static str = "voxel_size,variant,rms,mean,max,count,unknown_fraction,build_ms,median_insert_ms,invariant_violations";
    /// [`Self::CSV_HEADER`] without the timing columns.
    pub const ERROR_CSV_HEADER: &'static str = "voxel_size,variant,rms,mean,max,count,unknown_fraction,invariant_violations";

    /// One row for the surface reconstruction (`variant = tsdf_surface`)
    /// and one per ESDF variant. No header.
    pub fn write_csv_rows<W: Write>(&self, w: &mut W) -> Result<()> {
        self.write_rows(w, true)
    }

    /// Like [`Self::write_csv_rows`] but without timings, so the output is
    /// reproducible.
    pub fn write_error_csv_rows<W: Write>(&self, w: &mut W) -> Result<()> {
        self.write_rows(w, false)
    }

    fn write_rows<W: Write>(&self, w: &mut W, timing: bool) -> Result<()> {
        let insert = super::timing::median(&self.insert_times)
            .map(|d| format!("{:.3}", d.as_secs_f64() * 1e3))
            .unwrap_or_default();
        let row = |w: &mut W, name: &str, s: &ErrorStats, build: String, viol: String| {
            let times = if timing { format!("{build},{insert},") } else { String::new() };
            writeln!(
                w,
                "{},{},{:.9},{:.9},{:.9},{},{:.9},{times}{viol}",
                self.voxel_size, name, s.rms, s.mean, s.max, s.count, s.unknown_fraction
            )
        };
        row(w, "tsdf_surface", &self.surface, String::new(), String::new())?;
        for v in &self.variants {
            row(
                w,
                &v.name,
                &v.error,
                format!("{:.3}", v.build_time.as_secs_f64() * 1e3),
                v.invariant_violations.to_string(),
            )?;
        }
        Ok(())
    }
}

/// Noiseless scans from `n` random viewpoints at least `clearance` from
/// every surface.
pub fn render_scans(world: &World, camera: &Camera, n: usize, clearance: f64, seed: u64) -> Result<Vec<Scan>> {
    camera.validate()?;
    let poses = sample_viewpoints(world, n, clearance, seed)?;
    Ok(poses.iter().map(|p| render_depth(world, p, camera)).collect())
}

pub fn run_sim_bench(world: &World, scans: &[Scan], cfg: &SimBenchConfig) -> Result<SimBenchReport> {
    let v = cfg.voxel_size;
    let vps = cfg.voxels_per_side;
    let tsdf_int = TsdfIntegrator::new(cfg.tsdf.clone())?;
    let integrators: Vec<(EsdfVariant, EsdfIntegrator)> = cfg
        .variants
        .iter()
        .map(|&var| Ok((var, EsdfIntegrator::new(cfg.esdf_config(var), v, vps, cfg.tsdf.truncation)?)))
        .collect::<Result<_>>()?;

    let mut tsdf: Layer<TsdfVoxel> = Layer::new(v, vps);
    let incremental = |var: &EsdfVariant| cfg.incremental && *var != EsdfVariant::Occupancy;
    let mut esdf_layers: Vec<Layer<EsdfVoxel>> = integrators.iter().map(|(_, e)| e.new_layer()).collect();
    let mut update_times: Vec<Vec<Duration>> = vec![Vec::new(); integrators.len()];
    let mut violations = vec![0usize; integrators.len()];
    let mut insert_times = Vec::with_capacity(scans.len());

    for scan in scans {
        let t0 = Instant::now();
        tsdf_int.integrate(&mut tsdf, scan);
        insert_times.push(t0.elapsed());
        tsdf.drain_updated(UpdateConsumer::Mesh);
        let blocks = tsdf.drain_updated(UpdateConsumer::Esdf);
        for (i, (var, ei)) in integrators.iter().enumerate() {
            if !incremental(var) {
                continue;
            }
            let t0 = Instant::now();
            ei.propagate_blocks(&tsdf, &blocks, &mut esdf_layers[i]);
            update_times[i].push(t0.elapsed());
            if cfg.check_invariants {
                violations[i] += check_invariants(&tsdf, &esdf_layers[i], ei.band_radius(), cfg.d_max).total();
            }
        }
    }

    let gt_blocks = blocks_in_bounds(&world.bounds, v, vps);
    let gt = ground_truth_esdf_blocks(world, &gt_blocks, v, vps, cfg.d_max);
    let surface_points = world.sample_surface(cfg.surface_spacing);
    let surface = surface_error(&tsdf, &surface_points, cfg.tsdf.truncation);

    let mut variants = Vec::new();
    for (i, (var, ei)) in integrators.iter().enumerate() {
        let (layer, build_time) = if incremental(var) {
            let total = update_times[i].iter().sum();
            (std::mem::replace(&mut esdf_layers[i], Layer::new(v, vps)), total)
        } else {
            let t0 = Instant::now();
            let layer = match var {
                EsdfVariant::Occupancy => ei.build_from_occupancy(&tsdf),
                EsdfVariant::Band { .. } => ei.build_batch(&tsdf),
            };
            (layer, t0.elapsed())
        };
        variants.push(VariantReport {
            name: var.name(),
            error: esdf_error(&layer, &gt),
            build_time,
            update_times: std::mem::take(&mut update_times[i]),
            invariant_violations: violations[i],
        });
    }

    Ok(SimBenchReport {
        voxel_size: v,
        scans: scans.len(),
        tsdf_blocks: tsdf.num_blocks(),
        insert_times,
        surface,
        variants,
    })
}
