//! Built-in hardware/workload catalogs and synthetic fleet generation.
//!
//! A fleet is a fixed population of devices (GPU class plus local dataset
//! size). Link bandwidths are not fleet properties; they are drawn fresh
//! each round by the engine to model a shifting network.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeviceProfile, GpuSpec, Workload};
use crate::selection::SloPolicy;
use crate::stream::{stream_rng, LANE_FLEET};

/// Shape of the synthetic fleet and of the per-round environment draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    pub fleet_size: usize,
    /// `(gpu_name, fraction)` pairs; fractions must sum to 1.
    pub gpu_mix: Vec<(String, f64)>,
    /// Devices that report in (and get scored) each round.
    pub candidates_per_round: usize,
    /// Per-round uplink draw range in bits/s, inclusive.
    pub upload_range_bps: (f64, f64),
    /// Per-round downlink draw range in bits/s, inclusive.
    pub download_range_bps: (f64, f64),
    /// Per-device scale on the workload's nominal dataset size.
    pub dataset_multiplier_range: (f64, f64),
    pub seed: u64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            fleet_size: 1000,
            gpu_mix: gpu_catalog().into_iter().map(|g| (g.name, 0.2)).collect(),
            candidates_per_round: 100,
            upload_range_bps: (83e6, 181e6),
            download_range_bps: (650e6, 830e6),
            dataset_multiplier_range: (1.0, 1.0),
            seed: 42,
        }
    }
}

impl FleetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidFleetConfig(reason);
        if self.fleet_size == 0 {
            return Err(bad("fleet_size must be at least 1".into()));
        }
        if self.candidates_per_round == 0 || self.candidates_per_round > self.fleet_size {
            return Err(bad(format!(
                "candidates_per_round must be in [1, fleet_size], got {} with fleet_size {}",
                self.candidates_per_round, self.fleet_size
            )));
        }
        if self.gpu_mix.is_empty() {
            return Err(bad("gpu_mix must not be empty".into()));
        }
        let mut sum = 0.0;
        for (name, fraction) in &self.gpu_mix {
            gpu_by_name(name)?;
            if !(*fraction >= 0.0 && fraction.is_finite()) {
                return Err(bad(format!(
                    "gpu_mix fraction for {name} must be non-negative, got {fraction}"
                )));
            }
            sum += fraction;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(bad(format!("gpu_mix fractions must sum to 1, got {sum}")));
        }
        for (label, (lo, hi)) in [
            ("upload_range_bps", self.upload_range_bps),
            ("download_range_bps", self.download_range_bps),
            ("dataset_multiplier_range", self.dataset_multiplier_range),
        ] {
            if !(lo > 0.0 && lo.is_finite() && hi >= lo && hi.is_finite()) {
                return Err(bad(format!(
                    "{label} must satisfy 0 < lo <= hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// One member of the generated population.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetDevice {
    pub device_id: String,
    pub gpu: Arc<GpuSpec>,
    pub dataset_size: u64,
}

/// The five GPU classes the simulator knows out of the box.
pub fn gpu_catalog() -> Vec<GpuSpec> {
    [
        ("RTX 4090", 16384, 2.52e9, 31.5e9),
        ("Tesla V100", 5120, 1.38e9, 15.75e9),
        ("A100", 6912, 1.41e9, 31.5e9),
        ("A40", 10752, 1.74e9, 31.5e9),
        ("Tesla T4", 2560, 1.59e9, 15.75e9),
    ]
    .into_iter()
    .map(|(name, cores, clock_hz, pcie)| {
        GpuSpec::new(name, 2, cores, clock_hz, pcie).expect("catalog entry is valid")
    })
    .collect()
}

/// The three reference training jobs, at an epoch factor of 1.
pub fn workload_catalog() -> Vec<Workload> {
    [
        ("ResNet-50", 97.49e6, 24.53e9, 0.6e6, 50_000),
        ("AlexNet", 233.08e6, 4.28e9, 0.6e6, 100_000),
        ("MobileNetV2", 13.37e6, 1.80e9, 0.6e6, 50_000),
    ]
    .into_iter()
    .map(|(name, model, flops, sample, dataset)| {
        Workload::new(name, model, flops, sample, dataset, 1.0).expect("catalog entry is valid")
    })
    .collect()
}

pub fn gpu_by_name(name: &str) -> Result<GpuSpec> {
    gpu_catalog()
        .into_iter()
        .find(|g| g.name == name)
        .ok_or_else(|| Error::UnknownGpu(name.to_string()))
}

pub fn workload_by_name(name: &str) -> Result<Workload> {
    workload_catalog()
        .into_iter()
        .find(|w| w.name == name)
        .ok_or_else(|| Error::UnknownWorkload(name.to_string()))
}

/// Stock deadline and probability floor for a catalog workload.
pub fn default_slo(workload_name: &str) -> Result<SloPolicy> {
    let (deadline_s, floor) = match workload_name {
        "ResNet-50" => (50.0, 0.90),
        "AlexNet" => (125.0, 0.90),
        "MobileNetV2" => (100.0, 0.90),
        other => return Err(Error::UnknownWorkload(other.to_string())),
    };
    SloPolicy::new(deadline_s, floor)
}

/// Apportions `total` items across `fractions` with the largest-remainder
/// rule; ties go to the lower index.
fn largest_remainder(fractions: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &idx in order.iter().cycle().take(total - assigned) {
        counts[idx] += 1;
    }
    counts
}

/// Builds the device population: GPU classes apportioned by `gpu_mix`,
/// shuffled across device ids, dataset sizes scaled per device.
///
/// Deterministic in `config.seed`; independent of everything drawn later
/// during rounds.
pub fn generate_fleet(config: &FleetConfig, workload: &Workload) -> Result<Vec<FleetDevice>> {
    config.validate()?;
    let gpus: Vec<Arc<GpuSpec>> = config
        .gpu_mix
        .iter()
        .map(|(name, _)| gpu_by_name(name).map(Arc::new))
        .collect::<Result<_>>()?;
    let fractions: Vec<f64> = config.gpu_mix.iter().map(|(_, f)| *f).collect();
    let counts = largest_remainder(&fractions, config.fleet_size);

    let mut pool: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(idx, &count)| std::iter::repeat_n(idx, count))
        .collect();
    let mut rng = stream_rng(config.seed, LANE_FLEET, 0);
    pool.shuffle(&mut rng);

    let (mult_lo, mult_hi) = config.dataset_multiplier_range;
    Ok(pool
        .into_iter()
        .enumerate()
        .map(|(i, gpu_idx)| {
            let multiplier = rng.random_range(mult_lo..=mult_hi);
            let dataset_size = ((workload.dataset_size as f64 * multiplier).round() as u64).max(1);
            FleetDevice {
                device_id: format!("device-{i:04}"),
                gpu: Arc::clone(&gpus[gpu_idx]),
                dataset_size,
            }
        })
        .collect())
}

/// Draws `k` distinct devices, in sample order.
pub fn sample_candidates<'a, R: Rng + ?Sized>(
    fleet: &'a [FleetDevice],
    k: usize,
    rng: &mut R,
) -> Result<Vec<&'a FleetDevice>> {
    if k > fleet.len() {
        return Err(Error::SampleTooLarge {
            requested: k,
            available: fleet.len(),
        });
    }
    Ok(rand::seq::index::sample(rng, fleet.len(), k)
        .into_iter()
        .map(|i| &fleet[i])
        .collect())
}

/// Attaches this round's link bandwidths to a device. Draw order is fixed:
/// uplink first, then downlink.
pub fn sample_bandwidths<R: Rng + ?Sized>(
    device: &FleetDevice,
    config: &FleetConfig,
    rng: &mut R,
) -> DeviceProfile {
    let (up_lo, up_hi) = config.upload_range_bps;
    let (dn_lo, dn_hi) = config.download_range_bps;
    let upload_bps = rng.random_range(up_lo..=up_hi);
    let download_bps = rng.random_range(dn_lo..=dn_hi);
    DeviceProfile::new(
        device.device_id.clone(),
        Arc::clone(&device.gpu),
        upload_bps,
        download_bps,
        device.dataset_size,
    )
    .expect("ranges validated by FleetConfig")
}

/// Flat, serializable view of a device. Bandwidth fields are `None` for
/// fleet members (bandwidth is drawn per round) and `Some` for snapshots of
/// in-round profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetRecord {
    pub device_id: String,
    pub gpu_name: String,
    pub upload_bps: Option<f64>,
    pub download_bps: Option<f64>,
    pub dataset_size: u64,
}

pub fn export_fleet(path: &Path, fleet: &[FleetDevice]) -> Result<()> {
    let records: Vec<FleetRecord> = fleet
        .iter()
        .map(|d| FleetRecord {
            device_id: d.device_id.clone(),
            gpu_name: d.gpu.name.clone(),
            upload_bps: None,
            download_bps: None,
            dataset_size: d.dataset_size,
        })
        .collect();
    let mut writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut writer, &records)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn import_fleet(path: &Path) -> Result<Vec<FleetDevice>> {
    let records: Vec<FleetRecord> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    records
        .into_iter()
        .map(|r| {
            Ok(FleetDevice {
                device_id: r.device_id,
                gpu: Arc::new(gpu_by_name(&r.gpu_name)?),
                dataset_size: r.dataset_size,
            })
        })
        .collect()
}
