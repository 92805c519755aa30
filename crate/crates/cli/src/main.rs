// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{ConfigFile, MapArgs};

/// Incremental TSDF/ESDF voxel mapping.
#[derive(Debug, Parser)]
#[command(name = "sdfmap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse posed PLY scans into a TSDF layer file, optionally with an ESDF.
    Integrate {
        /// Directory of PLY scans, paired with trajectory lines by file name order.
        #[arg(long)]
        scans: PathBuf,
        /// TUM trajectory: `timestamp tx ty tz qx qy qz qw` per scan.
        #[arg(long)]
        trajectory: PathBuf,
        /// TSDF layer file to write.
        #[arg(long)]
        out: PathBuf,
        /// ESDF layer file to write, maintained incrementally after every scan.
        #[arg(long)]
        esdf_out: Option<PathBuf>,
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        config: ConfigFile,
    },
    /// Extract a marching-cubes mesh from a TSDF layer file.
    Mesh {
        layer: PathBuf,
        /// Binary PLY mesh to write.
        #[arg(long)]
        out: PathBuf,
        /// Include per-vertex colors.
        #[arg(long)]
        colors: bool,
    },
    /// Write the ESDF distances on an axis-aligned plane as a CSV grid.
    Slice {
        layer: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Plane coordinate in meters; the slice uses the voxel layer containing it.
        #[arg(long, allow_hyphen_values = true)]
        coord: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render scans of an analytic world and compare ESDF variants with ground truth.
    SimBench {
        /// World description file; the built-in default world when omitted.
        #[arg(long)]
        world: Option<PathBuf>,
        /// Number of random viewpoints.
        #[arg(long, default_value_t = 50)]
        viewpoints: usize,
        /// Minimum distance from a viewpoint to any surface.
        #[arg(long, default_value_t = 1.0)]
        clearance: f64,
        /// Voxel sizes to benchmark.
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.10, 0.20], conflicts_with = "voxel_size")]
        voxel_sizes: Vec<f64>,
        /// Maintain the band variants incrementally and check invariants after every scan.
        #[arg(long)]
        incremental: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Error report CSV (reproducible under a fixed seed).
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV of build and insertion times.
        #[arg(long)]
        timings: Option<PathBuf>,
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        config: ConfigFile,
    },
    /// Write the projective, quasi-Euclidean and Monte Carlo error tables.
    ErrorAnalysis {
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Monte Carlo trials per observation count.
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        /// Observation counts for the Monte Carlo table.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 3, 10, 100])]
        n_obs: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Tabulate map lookups needed to collision-check a trajectory.
    CollisionModel {
        /// Robot radii as `start:stop:step` in meters.
        #[arg(long, default_value = "0.1:1.0:0.05", value_parser = commands::parse_range)]
        radii: commands::Range,
        /// Voxel sizes as `start:stop:step` in meters.
        #[arg(long, default_value = "0.05:0.5:0.05", value_parser = commands::parse_range)]
        voxel_sizes: commands::Range,
        /// Trajectory arc length in meters.
        #[arg(long, default_value_t = 10.0)]
        length: f64,
        #[arg(long, default_value_t = sdfmap::esdf::DEFAULT_MAX_DISTANCE)]
        d_max: f64,
        /// Divide the sphere volume by the voxel edge length instead of its volume.
        #[arg(long)]
        edge_measure: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the header of a layer file.
    Info { layer: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        self as usize
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Integrate {
            scans,
            trajectory,
            out,
            esdf_out,
            map,
            config,
        } => commands::integrate(&scans, &trajectory, &out, esdf_out.as_deref(), map, config),
        Command::Mesh { layer, out, colors } => commands::mesh(&layer, &out, colors),
        Command::Slice { layer, axis, coord, out } => commands::slice(&layer, axis.index(), coord, &out),
        Command::SimBench {
            world,
            viewpoints,
            clearance,
            voxel_sizes,
            incremental,
            seed,
            out,
            timings,
            map,
            config,
        } => commands::sim_bench(commands::SimBenchArgs {
            world,
            viewpoints,
            clearance,
            voxel_sizes,
            incremental,
            seed,
            out,
            timings,
            map,
            config,
        }),
        Command::ErrorAnalysis { out, trials, n_obs, seed } => commands::error_analysis(&out, trials, &n_obs, seed),
        Command::CollisionModel {
            radii,
            voxel_sizes,
            length,
            d_max,
            edge_measure,
            out,
        } => commands::collision_model(&radii, &voxel_sizes, length, d_max, edge_measure, &out),
        Command::Info { layer } => commands::info(&layer),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
