//! Wall-clock timing of integration variants over a scan sequence.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::esdf::{EsdfConfig, EsdfIntegrator};
use crate::layer::{Layer, UpdateConsumer};
use crate::tsdf::{Scan, TsdfConfig, TsdfIntegrator, TsdfVoxel};

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub voxel_size: f64,
    pub voxels_per_side: usize,
    pub tsdf: TsdfConfig,
    /// Incremental ESDF maintained after every scan.
    pub esdf: Option<EsdfConfig>,
    /// Also time a batch ESDF rebuild after every scan.
    pub batch_reference: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTiming {
    pub variant: String,
    pub scan: usize,
    pub insert: Duration,
    pub esdf_incremental: Option<Duration>,
    pub esdf_batch: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: String,
    pub scans: usize,
    pub median_insert: Duration,
    pub median_esdf_incremental: Option<Duration>,
    pub median_esdf_batch: Option<Duration>,
    /// Fraction of scans after the first where the incremental update beat
    /// the batch rebuild.
    pub incremental_faster_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingTable {
    pub rows: Vec<ScanTiming>,
}

pub fn median(xs: &[Duration]) -> Option<Duration> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort();
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2
    })
}

fn ms(d: Option<Duration>) -> String {
    d.map(|d| format!("{:.6}", d.as_secs_f64() * 1e3)).unwrap_or_default()
}

impl TimingTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-variant medians, in first-appearance order.
    pub fn summaries(&self) -> Vec<VariantSummary> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.variant.as_str()) {
                names.push(&r.variant);
            }
        }
        names
            .into_iter()
            .map(|name| {
                let rows: Vec<&ScanTiming> = self.rows.iter().filter(|r| r.variant == name).collect();
                let inc: Vec<Duration> = rows.iter().filter_map(|r| r.esdf_incremental).collect();
                let bat: Vec<Duration> = rows.iter().filter_map(|r| r.esdf_batch).collect();
                let pairs: Vec<(Duration, Duration)> = rows
                    .iter()
                    .skip(1)
                    .filter_map(|r| Some((r.esdf_incremental?, r.esdf_batch?)))
                    .collect();
                VariantSummary {
                    variant: name.to_string(),
                    scans: rows.len(),
                    median_insert: median(&rows.iter().map(|r| r.insert).collect::<Vec<_>>())
                        .unwrap_or_default(),
                    median_esdf_incremental: median(&inc),
                    median_esdf_batch: median(&bat),
                    incremental_faster_fraction: (!pairs.is_empty()).then(|| {
                        pairs.iter().filter(|(i, b)| i < b).count() as f64 / pairs.len() as f64
                    }),
                }
            })
            .collect()
    }

    /// Header: `variant,scan,insert_ms,esdf_incremental_ms,esdf_batch_ms`.
    /// Missing measurements are empty fields.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "variant,scan,insert_ms,esdf_incremental_ms,esdf_batch_ms")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.variant,
                r.scan,
                ms(Some(r.insert)),
                ms(r.esdf_incremental),
                ms(r.esdf_batch)
            )?;
        }
        Ok(())
    }

    /// Header: `variant,scans,median_insert_ms,median_esdf_incremental_ms,
    /// median_esdf_batch_ms,incremental_faster_fraction`.
    pub fn write_summary_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "variant,scans,median_insert_ms,median_esdf_incremental_ms,median_esdf_batch_ms,incremental_faster_fraction"
        )?;
        for s in self.summaries() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.variant,
                s.scans,
                ms(Some(s.median_insert)),
                ms(s.median_esdf_incremental),
                ms(s.median_esdf_batch),
                s.incremental_faster_fraction.map(|f| f.to_string()).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// Integrate `scans` once per variant, sequentially, timing every step.
pub fn run_timing(scans: &[Scan], variants: &[Variant]) -> Result<TimingTable> {
    let mut table = TimingTable::default();
    for var in variants {
        let tsdf_int = TsdfIntegrator::new(var.tsdf.clone())?;
        let esdf_int = var
            .esdf
            .as_ref()
            .map(|c| {
                EsdfIntegrator::new(c.clone(), var.voxel_size, var.voxels_per_side, var.tsdf.truncation)
            })
            .transpose()?;
        let mut tsdf: Layer<TsdfVoxel> = Layer::new(var.voxel_size, var.voxels_per_side);
        let mut esdf = esdf_int.as_ref().map(|e| e.new_layer());
        for (i, scan) in scans.iter().enumerate() {
            let t0 = Instant::now();
            tsdf_int.integrate(&mut tsdf, scan);
            let insert = t0.elapsed();
            tsdf.drain_updated(UpdateConsumer::Mesh);
            let (mut inc, mut bat) = (None, None);
            if let (Some(ei), Some(layer)) = (&esdf_int, esdf.as_mut()) {
                let t0 = Instant::now();
                ei.update_from_tsdf(&mut tsdf, layer);
                inc = Some(t0.elapsed());
                if var.batch_reference {
                    let t0 = Instant::now();
                    let rebuilt = ei.build_batch(&tsdf);
                    bat = Some(t0.elapsed());
                    drop(rebuilt);
                }
            }
            table.rows.push(ScanTiming {
                variant: var.name.clone(),
                scan: i,
                insert,
                esdf_incremental: inc,
                esdf_batch: bat,
            });
        }
    }
    Ok(table)
}
