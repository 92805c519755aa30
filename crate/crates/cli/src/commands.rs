use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};

use sdfmap::analysis::bench::{render_scans, run_sim_bench, EsdfVariant, SimBenchConfig, SimBenchReport};
use sdfmap::analysis::collision::{trajectory_lookup_counts, VoxelMeasure};
use sdfmap::analysis::monte_carlo::{monte_carlo_merged_error, MonteCarloConfig};
use sdfmap::analysis::timing::median;
use sdfmap::analysis::{
    expected_projective_residual, expected_quasi_residual, projective_residual, quasi_euclidean_residual, MIN_INCIDENCE,
};
use sdfmap::esdf::FixedBand;
use sdfmap::io::{load_ply_points, load_tum_trajectory, write_mesh_ply};
use sdfmap::mesh::extract_mesh;
use sdfmap::serialize::{load_header, load_layer, serialize_layer};
use sdfmap::sim::{Camera, World};
use sdfmap::{
    BlockIndex, EsdfIntegrator, EsdfVoxel, GlobalVoxelIndex, Layer, LayerKind, Metric, Scan, TsdfIntegrator, TsdfVoxel,
};

use crate::config::{Band, ConfigFile, DistanceMetric, MapArgs, RunConfig};
use crate::output::Outputs;

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn timing_summary(times: &[Duration]) -> String {
    let min = times.iter().min().copied().unwrap_or_default();
    let max = times.iter().max().copied().unwrap_or_default();
    let med = median(times).unwrap_or_default();
    format!("min {:.2} ms, median {:.2} ms, max {:.2} ms", ms(min), ms(med), ms(max))
}

/// PLY files in `dir`, sorted by file name.
fn list_scans(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading scan directory {}", dir.display()))?;
    let mut paths = Vec::new();
    for e in entries {
        let path = e?.path();
        let is_ply = path
            .extension()
            .is_some_and(|x| x.eq_ignore_ascii_case("ply"));
        if is_ply && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn require_kind(path: &Path, expected: LayerKind, command: &str) -> Result<()> {
    let header = load_header(path).with_context(|| format!("reading {}", path.display()))?;
    if header.kind != expected {
        bail!(
            "{command} needs a {expected:?} layer but {} holds a {:?} layer",
            path.display(),
            header.kind
        );
    }
    Ok(())
}

pub fn integrate(
    scans_dir: &Path,
    trajectory: &Path,
    out: &Path,
    esdf_out: Option<&Path>,
    map: MapArgs,
    config: ConfigFile,
) -> Result<()> {
    let esdf_flags = map.esdf_flags();
    if esdf_out.is_none() && !esdf_flags.is_empty() {
        bail!("--esdf-out is required by {}", esdf_flags.join(", "));
    }
    let cfg = RunConfig::resolve(map, config.config.as_deref())?;

    let scan_paths = list_scans(scans_dir)?;
    if scan_paths.is_empty() {
        bail!("no scans found in {}", scans_dir.display());
    }
    let poses = load_tum_trajectory(trajectory).with_context(|| format!("reading trajectory {}", trajectory.display()))?;
    if poses.len() != scan_paths.len() {
        bail!(
            "trajectory {} has {} poses but {} scans were found in {}",
            trajectory.display(),
            poses.len(),
            scan_paths.len(),
            scans_dir.display()
        );
    }
    cfg.echo(&[("scans", scan_paths.len().to_string())]);

    let tsdf_int = TsdfIntegrator::new(cfg.tsdf())?;
    let esdf_int = match esdf_out {
        Some(_) => Some(EsdfIntegrator::new(
            cfg.esdf(),
            cfg.voxel_size,
            sdfmap::layer::DEFAULT_VOXELS_PER_SIDE,
            cfg.truncation(),
        )?),
        None => None,
    };
    let mut tsdf: Layer<TsdfVoxel> = Layer::new(cfg.voxel_size, sdfmap::layer::DEFAULT_VOXELS_PER_SIDE);
    let mut esdf = esdf_int.as_ref().map(|e| e.new_layer());
    let mut insert_times = Vec::with_capacity(scan_paths.len());
    let mut esdf_times = Vec::new();
    let mut points = 0;
    for (path, (_, pose)) in scan_paths.iter().zip(&poses) {
        let cloud = load_ply_points(path).with_context(|| format!("reading scan {}", path.display()))?;
        points += cloud.points.len();
        let scan = match cloud.colors {
            Some(c) => Scan::with_colors(cloud.points, c, *pose)?,
            None => Scan::new(cloud.points, *pose),
        };
        let t0 = Instant::now();
        tsdf_int.integrate(&mut tsdf, &scan);
        insert_times.push(t0.elapsed());
        if let (Some(ei), Some(layer)) = (&esdf_int, esdf.as_mut()) {
            let t0 = Instant::now();
            ei.update_from_tsdf(&mut tsdf, layer);
            esdf_times.push(t0.elapsed());
        }
    }

    let mut outputs = Outputs::new();
    outputs.write(out, |w| Ok(serialize_layer(&tsdf, w)?))?;
    if let (Some(path), Some(layer)) = (esdf_out, &esdf) {
        outputs.write(path, |w| Ok(serialize_layer(layer, w)?))?;
    }
    outputs.commit();

    println!(
        "integrated {} scans ({points} points) into {} blocks; insert {}",
        scan_paths.len(),
        tsdf.num_blocks(),
        timing_summary(&insert_times)
    );
    if !esdf_times.is_empty() {
        println!("esdf update {}", timing_summary(&esdf_times));
    }
    Ok(())
}

pub fn mesh(layer_path: &Path, out: &Path, colors: bool) -> Result<()> {
    require_kind(layer_path, LayerKind::Tsdf, "mesh")?;
    let layer: Layer<TsdfVoxel> = load_layer(layer_path).with_context(|| format!("reading {}", layer_path.display()))?;
    let mut blocks: Vec<BlockIndex> = layer.block_indices().collect();
    blocks.sort();
    let mesh = extract_mesh(&layer, &blocks, colors);
    let mut outputs = Outputs::new();
    outputs.write(out, |w| Ok(write_mesh_ply(w, &mesh)?))?;
    outputs.commit();
    println!("mesh: {} vertices, {} triangles", mesh.num_vertices(), mesh.num_triangles());
    Ok(())
}

pub fn slice(layer_path: &Path, axis: usize, coord: f64, out: &Path) -> Result<()> {
    require_kind(layer_path, LayerKind::Esdf, "slice")?;
    let layer: Layer<EsdfVoxel> = load_layer(layer_path).with_context(|| format!("reading {}", layer_path.display()))?;
    let v = layer.voxel_size();
    let vps = layer.voxels_per_side() as i64;
    let k = (coord / v).floor() as i64;
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };

    // Voxel range on the two in-plane axes covered by blocks the plane cuts.
    let mut lo = [i64::MAX; 2];
    let mut hi = [i64::MIN; 2];
    for bi in layer.block_indices() {
        let first = bi.first_voxel(vps as usize).as_array();
        if !(first[axis]..first[axis] + vps).contains(&k) {
            continue;
        }
        for (slot, ax) in [a, b].into_iter().enumerate() {
            lo[slot] = lo[slot].min(first[ax]);
            hi[slot] = hi[slot].max(first[ax] + vps - 1);
        }
    }

    let names = ["x", "y", "z"];
    let center = |i: i64| (i as f64 + 0.5) * v;
    let mut outputs = Outputs::new();
    outputs.write(out, |w| {
        write!(w, "{}\\{}", names[b], names[a])?;
        if lo[0] <= hi[0] {
            for i in lo[0]..=hi[0] {
                write!(w, ",{:.6}", center(i))?;
            }
        }
        writeln!(w)?;
        if lo[1] <= hi[1] {
            for j in lo[1]..=hi[1] {
                write!(w, "{:.6}", center(j))?;
                for i in lo[0]..=hi[0] {
                    let mut g = [0i64; 3];
                    g[axis] = k;
                    g[a] = i;
                    g[b] = j;
                    match layer.voxel(GlobalVoxelIndex::new(g[0], g[1], g[2])) {
                        Some(e) if e.observed => write!(w, ",{:.6}", e.distance)?,
                        _ => write!(w, ",nan")?,
                    }
                }
                writeln!(w)?;
            }
        }
        Ok(())
    })?;
    outputs.commit();
    let cells = if lo[0] <= hi[0] { (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) } else { 0 };
    println!("slice {}={:.6}: {cells} cells", names[axis], center(k));
    Ok(())
}

pub struct SimBenchArgs {
    pub world: Option<PathBuf>,
    pub viewpoints: usize,
    pub clearance: f64,
    pub voxel_sizes: Vec<f64>,
    pub incremental: bool,
    pub seed: u64,
    pub out: PathBuf,
    pub timings: Option<PathBuf>,
    pub map: MapArgs,
    pub config: ConfigFile,
}

/// Standard variants restricted to the requested band and metric.
fn select_variants(map: &MapArgs) -> Vec<EsdfVariant> {
    let band = map.esdf_band.map(|b| match b {
        Band::OneVoxel => FixedBand::OneVoxel,
        Band::HalfTrunc => FixedBand::HalfTruncation,
    });
    let metric = map.metric.map(|m| match m {
        DistanceMetric::Quasi => Metric::QuasiEuclidean,
        DistanceMetric::Euclid => Metric::Euclidean,
    });
    EsdfVariant::standard()
        .into_iter()
        .filter(|var| match var {
            EsdfVariant::Band { band: b, metric: m } => band.is_none_or(|x| x == *b) && metric.is_none_or(|x| x == *m),
            EsdfVariant::Occupancy => band.is_none() && metric.is_none(),
        })
        .collect()
}

pub fn sim_bench(args: SimBenchArgs) -> Result<()> {
    let voxel_sizes = match args.map.voxel_size {
        Some(v) => vec![v],
        None => args.voxel_sizes.clone(),
    };
    ensure!(!voxel_sizes.is_empty(), "--voxel-sizes is empty");
    let world = match &args.world {
        Some(p) => World::load(p).with_context(|| format!("reading world {}", p.display()))?,
        None => World::default_world(),
    };
    let variants = select_variants(&args.map);

    let mut configs = Vec::new();
    for &v in &voxel_sizes {
        let mut map = args.map.clone();
        map.voxel_size = Some(v);
        configs.push(RunConfig::resolve(map, args.config.config.as_deref())?);
    }
    configs[0].echo(&[
        ("voxel-sizes", format!("{voxel_sizes:?}")),
        ("viewpoints", args.viewpoints.to_string()),
        ("clearance", args.clearance.to_string()),
        ("incremental", args.incremental.to_string()),
        ("seed", args.seed.to_string()),
    ]);

    let scans = render_scans(&world, &Camera::default(), args.viewpoints, args.clearance, args.seed)?;
    let mut reports: Vec<SimBenchReport> = Vec::new();
    for cfg in &configs {
        let mut bench = SimBenchConfig::new(cfg.voxel_size);
        bench.tsdf = cfg.tsdf();
        bench.d_max = cfg.d_max;
        bench.queue_mode = cfg.esdf().queue_mode;
        bench.variants = variants.clone();
        bench.incremental = args.incremental;
        bench.check_invariants = args.incremental;
        let report = run_sim_bench(&world, &scans, &bench)?;
        println!("v={:.3}: surface rms {:.4} m", cfg.voxel_size, report.surface.rms);
        for var in &report.variants {
            println!(
                "  {:<18} rms {:.4} m, unknown {:.3}, build {:.1} ms",
                var.name,
                var.error.rms,
                var.error.unknown_fraction,
                ms(var.build_time)
            );
        }
        reports.push(report);
    }

    let mut outputs = Outputs::new();
    outputs.write(&args.out, |w| {
        writeln!(w, "{}", SimBenchReport::ERROR_CSV_HEADER)?;
        for r in &reports {
            r.write_error_csv_rows(w)?;
        }
        Ok(())
    })?;
    if let Some(path) = &args.timings {
        outputs.write(path, |w| {
            writeln!(w, "{}", SimBenchReport::CSV_HEADER)?;
            for r in &reports {
                r.write_csv_rows(w)?;
            }
            Ok(())
        })?;
    }
    outputs.commit();
    Ok(())
}

pub fn error_analysis(dir: &Path, trials: usize, n_obs: &[usize], seed: u64) -> Result<()> {
    ensure!(trials > 0, "--trials must be positive");
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let constants = [
        ("expected_projective_residual", expected_projective_residual(1.0)),
        ("quasi_euclidean_residual_pi_8", quasi_euclidean_residual(PI / 8.0, 1.0)),
        ("expected_quasi_residual", expected_quasi_residual(1.0)),
    ];
    let steps = 90;
    let mut outputs = Outputs::new();
    outputs.write(&dir.join("summary.csv"), |w| {
        writeln!(w, "quantity,value,rounded")?;
        for (name, x) in constants {
            writeln!(w, "{name},{x:.9},{x:.4}")?;
        }
        Ok(())
    })?;
    outputs.write(&dir.join("projective.csv"), |w| {
        writeln!(w, "theta_rad,residual_per_meter")?;
        for i in 0..=steps {
            let theta = MIN_INCIDENCE + (PI / 2.0 - MIN_INCIDENCE) * i as f64 / steps as f64;
            writeln!(w, "{theta:.9},{:.9}", projective_residual(theta, 1.0))?;
        }
        Ok(())
    })?;
    outputs.write(&dir.join("quasi_euclidean.csv"), |w| {
        writeln!(w, "phi_rad,residual_per_meter")?;
        for i in 0..=steps {
            let phi = PI / 4.0 * i as f64 / steps as f64;
            writeln!(w, "{phi:.9},{:.9}", quasi_euclidean_residual(phi, 1.0))?;
        }
        Ok(())
    })?;
    let results: Vec<_> = n_obs
        .iter()
        .map(|&n| monte_carlo_merged_error(&MonteCarloConfig::new(n, trials, 1.0, seed)))
        .collect();
    outputs.write(&dir.join("monte_carlo.csv"), |w| {
        writeln!(w, "n_obs,trials,quantile,abs_error_over_truncation")?;
        for r in &results {
            for (q, e) in &r.quantiles {
                writeln!(w, "{},{},{q},{e:.9}", r.n_obs, r.trials)?;
            }
            writeln!(w, "{},{},max,{:.9}", r.n_obs, r.trials, r.max)?;
        }
        Ok(())
    })?;
    outputs.commit();

    for (name, x) in constants {
        println!("{name} = {x:.4}");
    }
    for r in &results {
        let p95 = r.quantile(0.95).unwrap_or(f64::NAN);
        println!("monte carlo n_obs={}: p95 |error| = {p95:.3} of truncation", r.n_obs);
    }
    Ok(())
}

/// Inclusive arithmetic range parsed from `start:stop:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

pub fn parse_range(s: &str) -> std::result::Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected start:stop:step, got '{s}'"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let r = Range {
        start: num(start)?,
        stop: num(stop)?,
        step: num(step)?,
    };
    if !(r.start > 0.0 && r.stop >= r.start && r.step > 0.0) {
        return Err(format!("need 0 < start <= stop and step > 0, got '{s}'"));
    }
    Ok(r)
}

pub fn collision_model(
    radii: &Range,
    voxel_sizes: &Range,
    length: f64,
    d_max: f64,
    edge_measure: bool,
    out: &Path,
) -> Result<()> {
    ensure!(length > 0.0, "--length must be positive, got {length}");
    ensure!(d_max > 0.0, "--d-max must be positive, got {d_max}");
    let measure = if edge_measure { VoxelMeasure::EdgeLength } else { VoxelMeasure::Volume };
    let mut rows = 0;
    let mut esdf_wins = 0;
    let mut outputs = Outputs::new();
    outputs.write(out, |w| {
        writeln!(w, "voxel_size,radius,length,d_max,n_occupancy,n_esdf_max,n_esdf_min")?;
        for v in voxel_sizes.values() {
            for r in radii.values() {
                let c = trajectory_lookup_counts(r, v, length, d_max, measure);
                writeln!(
                    w,
                    "{v:.6},{r:.6},{length},{d_max},{},{},{}",
                    c.occupancy, c.esdf_max, c.esdf_min
                )?;
                rows += 1;
                esdf_wins += (c.esdf_max <= c.occupancy) as usize;
            }
        }
        Ok(())
    })?;
    outputs.commit();
    println!("{rows} (radius, voxel size) cells; esdf needs no more lookups than occupancy in {esdf_wins}");
    Ok(())
}

pub fn info(path: &Path) -> Result<()> {
    let h = load_header(path).with_context(|| format!("reading {}", path.display()))?;
    println!("file: {}", path.display());
    println!("kind: {:?}", h.kind);
    println!("version: {}", h.version);
    println!("voxel_size: {}", h.voxel_size);
    println!("voxels_per_side: {}", h.voxels_per_side);
    println!("block_edge_length: {}", h.voxel_size * h.voxels_per_side as f64);
    println!("blocks: {}", h.block_count);
    Ok(())
}
