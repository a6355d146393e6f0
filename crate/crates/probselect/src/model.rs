//! Analytical latency model for one federated training round on a GPU
//! device: download the global model, train locally, upload the update.
//!
//! Unit canon (decimal prefixes everywhere): payload sizes in bytes, network
//! bandwidth in bits/s, PCIe bandwidth in bytes/s, clocks in Hz, work in
//! FLOPs, time in seconds.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hardware description of one GPU class.
#[derive(Debug, Clone, PartialEq)]
pub struct GpuSpec {
    pub name: String,
    /// FLOPs retired per core per clock cycle.
    pub ops_per_cycle: u32,
    /// Shader core count.
    pub core_count: u32,
    /// Boost clock in Hz.
    pub boost_clock_hz: f64,
    /// Host-to-device copy bandwidth in bytes/s (note: bytes, not bits).
    pub pcie_bytes_per_sec: f64,
}

impl GpuSpec {
    pub fn new(
        name: impl Into<String>,
        ops_per_cycle: u32,
        core_count: u32,
        boost_clock_hz: f64,
        pcie_bytes_per_sec: f64,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: &str| Error::InvalidGpuSpec {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if ops_per_cycle == 0 {
            return Err(invalid("ops_per_cycle must be at least 1"));
        }
        if core_count == 0 {
            return Err(invalid("core_count must be at least 1"));
        }
        if !(boost_clock_hz > 0.0) {
            return Err(invalid("boost_clock_hz must be positive"));
        }
        if !(pcie_bytes_per_sec > 0.0) {
            return Err(invalid("pcie_bytes_per_sec must be positive"));
        }
        Ok(Self {
            name,
            ops_per_cycle,
            core_count,
            boost_clock_hz,
            pcie_bytes_per_sec,
        })
    }

    /// Theoretical peak throughput in FLOPs/s: ops/cycle x clock x cores.
    pub fn peak_flops(&self) -> f64 {
        self.ops_per_cycle as f64 * self.boost_clock_hz * self.core_count as f64
    }
}

/// Training job description: what has to move and how much compute one
/// sample costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    /// Serialized model size in bytes (moved down, up, and over PCIe).
    pub model_size_bytes: f64,
    /// Training cost of one sample in FLOPs.
    pub flops_per_sample: f64,
    /// Size of one training sample in bytes.
    pub sample_size_bytes: f64,
    /// Samples held by a device running this workload.
    pub dataset_size: u64,
    /// Scales the per-sample work (covers epoch count / convergence slack).
    pub epoch_factor: f64,
}

impl Workload {
    pub fn new(
        name: impl Into<String>,
        model_size_bytes: f64,
        flops_per_sample: f64,
        sample_size_bytes: f64,
        dataset_size: u64,
        epoch_factor: f64,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: &str| Error::InvalidWorkload {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if !(model_size_bytes > 0.0) {
            return Err(invalid("model_size_bytes must be positive"));
        }
        if !(flops_per_sample > 0.0) {
            return Err(invalid("flops_per_sample must be positive"));
        }
        if !(sample_size_bytes > 0.0) {
            return Err(invalid("sample_size_bytes must be positive"));
        }
        if !(epoch_factor > 0.0) {
            return Err(invalid("epoch_factor must be positive"));
        }
        Ok(Self {
            name,
            model_size_bytes,
            flops_per_sample,
            sample_size_bytes,
            dataset_size,
            epoch_factor,
        })
    }
}

/// One device at one point in time: its GPU, current link bandwidths, and
/// local dataset size.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub device_id: String,
    pub gpu: Arc<GpuSpec>,
    /// Uplink bandwidth in bits/s.
    pub upload_bps: f64,
    /// Downlink bandwidth in bits/s.
    pub download_bps: f64,
    /// Local training samples.
    pub dataset_size: u64,
}

impl DeviceProfile {
    pub fn new(
        device_id: impl Into<String>,
        gpu: Arc<GpuSpec>,
        upload_bps: f64,
        download_bps: f64,
        dataset_size: u64,
    ) -> Result<Self> {
        let device_id = device_id.into();
        let invalid = |reason: &str| Error::InvalidDeviceProfile {
            device_id: device_id.clone(),
            reason: reason.to_string(),
        };
        if !(upload_bps > 0.0) {
            return Err(invalid("upload_bps must be positive"));
        }
        if !(download_bps > 0.0) {
            return Err(invalid("download_bps must be positive"));
        }
        if dataset_size == 0 {
            return Err(invalid("dataset_size must be at least 1"));
        }
        Ok(Self {
            device_id,
            gpu,
            upload_bps,
            download_bps,
            dataset_size,
        })
    }
}

/// Per-phase latencies of one round, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBreakdown {
    pub download_s: f64,
    pub compute_s: f64,
    pub upload_s: f64,
    pub total_s: f64,
}

impl LatencyBreakdown {
    /// Total is always `(download + compute) + upload`, in that association,
    /// so the decomposition reproduces it bit for bit.
    pub fn new(download_s: f64, compute_s: f64, upload_s: f64) -> Self {
        Self {
            download_s,
            compute_s,
            upload_s,
            total_s: download_s + compute_s + upload_s,
        }
    }
}

fn transfer_latency(payload_bytes: f64, bandwidth_bps: f64) -> Result<f64> {
    if !(bandwidth_bps > 0.0) {
        return Err(Error::NonPositiveBandwidth(bandwidth_bps));
    }
    Ok(payload_bytes * 8.0 / bandwidth_bps)
}

/// Seconds to pull `payload_bytes` over a `bandwidth_bps` downlink.
pub fn download_latency(payload_bytes: f64, bandwidth_bps: f64) -> Result<f64> {
    transfer_latency(payload_bytes, bandwidth_bps)
}

/// Seconds to push `payload_bytes` over a `bandwidth_bps` uplink.
pub fn upload_latency(payload_bytes: f64, bandwidth_bps: f64) -> Result<f64> {
    transfer_latency(payload_bytes, bandwidth_bps)
}

/// Seconds to stage the model over PCIe before training starts.
pub fn model_load_latency(workload: &Workload, gpu: &GpuSpec) -> f64 {
    workload.model_size_bytes / gpu.pcie_bytes_per_sec
}

fn check_efficiency(efficiency: f64) -> Result<()> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::EfficiencyOutOfRange(efficiency));
    }
    Ok(())
}

/// Local training time in seconds at FLOP utilization `efficiency`:
/// model staging plus, per effective sample, arithmetic at
/// `peak * efficiency` and the PCIe copy of the sample itself.
///
/// `efficiency` must lie in (0, 1].
pub fn compute_latency(
    profile: &DeviceProfile,
    workload: &Workload,
    efficiency: f64,
) -> Result<f64> {
    check_efficiency(efficiency)?;
    let gpu = &profile.gpu;
    let per_sample = workload.flops_per_sample / (gpu.peak_flops() * efficiency)
        + workload.sample_size_bytes / gpu.pcie_bytes_per_sec;
    Ok(model_load_latency(workload, gpu)
        + workload.epoch_factor * profile.dataset_size as f64 * per_sample)
}

/// Full round latency split into download, compute, and upload phases.
pub fn total_latency(
    profile: &DeviceProfile,
    workload: &Workload,
    efficiency: f64,
) -> Result<LatencyBreakdown> {
    let download_s = download_latency(workload.model_size_bytes, profile.download_bps)?;
    let compute_s = compute_latency(profile, workload, efficiency)?;
    let upload_s = upload_latency(workload.model_size_bytes, profile.upload_bps)?;
    Ok(LatencyBreakdown::new(download_s, compute_s, upload_s))
}

/// Inverts `compute_latency`: the FLOP utilization that explains a measured
/// training time.
///
/// The measurement must exceed the pure data-movement overhead (model
/// staging plus sample copies), otherwise no efficiency can explain it.
/// Values above 1.0 are returned as-is; they mean the measurement is faster
/// than the theoretical peak and the inputs deserve a second look.
pub fn extract_efficiency(
    measured_seconds: f64,
    profile: &DeviceProfile,
    workload: &Workload,
) -> Result<f64> {
    let gpu = &profile.gpu;
    let effective_samples = workload.epoch_factor * profile.dataset_size as f64;
    let overhead = model_load_latency(workload, gpu)
        + effective_samples * workload.sample_size_bytes / gpu.pcie_bytes_per_sec;
    if !(measured_seconds > overhead) {
        return Err(Error::InfeasibleMeasurement {
            measured: measured_seconds,
            overhead,
        });
    }
    Ok(effective_samples * workload.flops_per_sample
        / (gpu.peak_flops() * (measured_seconds - overhead)))
}
