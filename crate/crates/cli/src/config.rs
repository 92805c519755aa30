//! Map configuration shared by the subcommands: built-in defaults, overlaid
//! by an optional TOML file, overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use sdfmap::{EsdfConfig, FixedBand, MergeMode, Metric, QueueMode, TsdfConfig, WeightMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    Const,
    Z2,
    Z2Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Merge {
    Simple,
    Grouped,
    Antigraze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    OneVoxel,
    HalfTrunc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    Quasi,
    Euclid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Queue {
    Fifo,
    PrioSingle,
    PrioMulti,
}

/// Flags that configure TSDF and ESDF construction. Every field is optional
/// so that unset flags fall through to the config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MapArgs {
    /// Voxel edge length in meters.
    #[arg(long)]
    pub voxel_size: Option<f64>,
    /// Truncation distance in voxels [default: 4].
    #[arg(long)]
    pub truncation_mult: Option<f64>,
    /// Observation weighting [default: z2-dropoff].
    #[arg(long, value_enum)]
    pub weight: Option<Weight>,
    /// How scan points are merged before raycasting [default: grouped].
    #[arg(long, value_enum)]
    pub merge: Option<Merge>,
    /// TSDF voxels copied verbatim into the ESDF [default: one-voxel].
    #[arg(long, value_enum)]
    pub esdf_band: Option<Band>,
    /// ESDF distance metric [default: quasi].
    #[arg(long, value_enum)]
    pub metric: Option<DistanceMetric>,
    /// ESDF open-set queue [default: prio-single].
    #[arg(long, value_enum)]
    pub queue: Option<Queue>,
    /// Largest ESDF distance in meters [default: 4].
    #[arg(long)]
    pub d_max: Option<f64>,
}

impl MapArgs {
    fn overlay(self, base: MapArgs) -> MapArgs {
        MapArgs {
            voxel_size: self.voxel_size.or(base.voxel_size),
            truncation_mult: self.truncation_mult.or(base.truncation_mult),
            weight: self.weight.or(base.weight),
            merge: self.merge.or(base.merge),
            esdf_band: self.esdf_band.or(base.esdf_band),
            metric: self.metric.or(base.metric),
            queue: self.queue.or(base.queue),
            d_max: self.d_max.or(base.d_max),
        }
    }

    /// Names of the ESDF flags that were set.
    pub fn esdf_flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.esdf_band.is_some() {
            out.push("--esdf-band");
        }
        if self.metric.is_some() {
            out.push("--metric");
        }
        if self.queue.is_some() {
            out.push("--queue");
        }
        if self.d_max.is_some() {
            out.push("--d-max");
        }
        out
    }
}

/// Fully resolved map configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub voxel_size: f64,
    pub truncation_mult: f64,
    pub weight: Weight,
    pub merge: Merge,
    pub esdf_band: Band,
    pub metric: DistanceMetric,
    pub queue: Queue,
    pub d_max: f64,
}

impl RunConfig {
    pub const DEFAULT_VOXEL_SIZE: f64 = 0.1;

    /// Resolve flags over the optional config file over built-in defaults.
    pub fn resolve(flags: MapArgs, file: Option<&Path>) -> Result<Self> {
        let from_file = match file {
            Some(path) => load_file(path)?,
            None => MapArgs::default(),
        };
        let a = flags.overlay(from_file);
        let cfg = RunConfig {
            voxel_size: a.voxel_size.unwrap_or(Self::DEFAULT_VOXEL_SIZE),
            truncation_mult: a.truncation_mult.unwrap_or(4.0),
            weight: a.weight.unwrap_or(Weight::Z2Dropoff),
            merge: a.merge.unwrap_or(Merge::Grouped),
            esdf_band: a.esdf_band.unwrap_or(Band::OneVoxel),
            metric: a.metric.unwrap_or(DistanceMetric::Quasi),
            queue: a.queue.unwrap_or(Queue::PrioSingle),
            d_max: a.d_max.unwrap_or(sdfmap::esdf::DEFAULT_MAX_DISTANCE),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reject values and combinations the integrators cannot run with.
    /// Messages name every flag involved.
    pub fn validate(&self) -> Result<()> {
        let v = self.voxel_size;
        if !(v.is_finite() && v > 0.0) {
            bail!("--voxel-size must be positive, got {v}");
        }
        if !(self.truncation_mult > 1.0) {
            bail!(
                "--truncation-mult must exceed 1 so the drop-off distance (one voxel) lies inside the truncation band, got {}",
                self.truncation_mult
            );
        }
        let delta = self.truncation();
        let gamma = self.band().radius(v, delta);
        if !(self.d_max > gamma) {
            bail!(
                "--d-max {} must exceed the --esdf-band {} radius {gamma} m",
                self.d_max,
                self.band_name()
            );
        }
        if self.metric == DistanceMetric::Euclid && (self.d_max + gamma) / v > i8::MAX as f64 {
            bail!(
                "--metric euclid stores seed offsets as 8-bit voxel counts: --d-max {} at --voxel-size {v} reaches {:.0} voxels, more than 127",
                self.d_max,
                (self.d_max + gamma) / v
            );
        }
        self.tsdf().validate()?;
        self.esdf().validate(v, delta)?;
        Ok(())
    }

    pub fn truncation(&self) -> f64 {
        self.truncation_mult * self.voxel_size
    }

    fn band(&self) -> FixedBand {
        match self.esdf_band {
            Band::OneVoxel => FixedBand::OneVoxel,
            Band::HalfTrunc => FixedBand::HalfTruncation,
        }
    }

    fn band_name(&self) -> &'static str {
        match self.esdf_band {
            Band::OneVoxel => "one-voxel",
            Band::HalfTrunc => "half-trunc",
        }
    }

    pub fn tsdf(&self) -> TsdfConfig {
        TsdfConfig {
            truncation: self.truncation(),
            weight_mode: match self.weight {
                Weight::Const => WeightMode::Constant,
                Weight::Z2 => WeightMode::InverseSquare,
                Weight::Z2Dropoff => WeightMode::InverseSquareDropoff,
            },
            merge_mode: match self.merge {
                Merge::Simple => MergeMode::SimpleRaycast,
                Merge::Grouped => MergeMode::GroupedRaycast,
                Merge::Antigraze => MergeMode::GroupedAntiGrazing,
            },
            ..TsdfConfig::for_voxel_size(self.voxel_size)
        }
    }

    pub fn esdf(&self) -> EsdfConfig {
        EsdfConfig {
            d_max: self.d_max,
            fixed_band: self.band(),
            metric: match self.metric {
                DistanceMetric::Quasi => Metric::QuasiEuclidean,
                DistanceMetric::Euclid => Metric::Euclidean,
            },
            queue_mode: match self.queue {
                Queue::Fifo => QueueMode::Fifo,
                Queue::PrioSingle => QueueMode::PrioritySingleInsert,
                Queue::PrioMulti => QueueMode::PriorityMultiInsert,
            },
            bucket_width: None,
        }
    }

    /// Print the effective configuration to stderr.
    pub fn echo(&self, extra: &[(&str, String)]) {
        let mut text = toml::to_string(self).expect("config serializes");
        for (k, v) in extra {
            text.push_str(&format!("{k} = {v}\n"));
        }
        eprint!("# effective configuration\n{text}");
    }
}

fn load_file(path: &Path) -> Result<MapArgs> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
}

/// `--config` flag shared by the map-building subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFile {
    /// TOML file with defaults for the map flags; keys are the flag names
    /// without the leading dashes, e.g. `voxel-size = 0.05`.
    #[arg(long)]
    pub config: Option<PathBuf>,
}
