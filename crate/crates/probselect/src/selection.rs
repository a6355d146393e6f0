//! Deadline-aware client selection.
//!
//! `probselect` turns a latency deadline into a per-device minimum FLOP
//! utilization, scores each device by the probability that it clears that
//! bar, and keeps the ones above a probability floor. `fedlim_select` is the
//! baseline it is compared against: take everyone (or a uniform subsample)
//! and let the deadline sort it out after the fact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::erf;
use crate::error::{Error, Result};
use crate::model::{self, DeviceProfile, Workload};

/// Round deadline plus the confidence required to hand a device work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloPolicy {
    /// End-to-end round deadline in seconds.
    pub deadline_s: f64,
    /// Select a device only if its compliance probability reaches this.
    pub probability_threshold: f64,
}

impl SloPolicy {
    pub fn new(deadline_s: f64, probability_threshold: f64) -> Result<Self> {
        if !(deadline_s > 0.0 && deadline_s.is_finite()) {
            return Err(Error::InvalidSloPolicy(format!(
                "deadline_s must be positive and finite, got {deadline_s}"
            )));
        }
        if !(0.0..=1.0).contains(&probability_threshold) {
            return Err(Error::InvalidSloPolicy(format!(
                "probability_threshold must be in [0, 1], got {probability_threshold}"
            )));
        }
        Ok(Self {
            deadline_s,
            probability_threshold,
        })
    }
}

/// Gaussian belief over a device's FLOP utilization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyDistribution {
    pub mean: f64,
    pub std_dev: f64,
}

impl EfficiencyDistribution {
    pub fn new(mean: f64, std_dev: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "mean must be finite, got {mean}"
            )));
        }
        if !(std_dev > 0.0 && std_dev.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "std_dev must be positive and finite, got {std_dev}"
            )));
        }
        Ok(Self { mean, std_dev })
    }
}

/// Verdict for one candidate device.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDecision {
    pub device_id: String,
    /// Minimum FLOP utilization that still meets the deadline. `None` when
    /// the policy never computed one (the baseline does not).
    pub efficiency_threshold: Option<f64>,
    pub compliance_probability: f64,
    pub selected: bool,
}

/// Deadline minus both network transfers: the slice left for local compute.
pub fn available_compute_time(
    slo: &SloPolicy,
    profile: &DeviceProfile,
    workload: &Workload,
) -> f64 {
    let download_s = workload.model_size_bytes * 8.0 / profile.download_bps;
    let upload_s = workload.model_size_bytes * 8.0 / profile.upload_bps;
    slo.deadline_s - (download_s + upload_s)
}

/// Compute slice minus the efficiency-independent PCIe traffic (model
/// staging and sample copies): what is left for arithmetic alone.
pub fn net_compute_time(tau_compute: f64, profile: &DeviceProfile, workload: &Workload) -> f64 {
    let staging = model::model_load_latency(workload, &profile.gpu);
    let sample_transfer =
        workload.epoch_factor * profile.dataset_size as f64 * workload.sample_size_bytes
            / profile.gpu.pcie_bytes_per_sec;
    tau_compute - (staging + sample_transfer)
}

/// Minimum FLOP utilization at which the device still meets the deadline.
///
/// Infinity when the budget is exhausted by transfers alone, so no
/// utilization can save the round.
pub fn efficiency_threshold(profile: &DeviceProfile, workload: &Workload, slo: &SloPolicy) -> f64 {
    let tau_compute = available_compute_time(slo, profile, workload);
    let tau_net = net_compute_time(tau_compute, profile, workload);
    if !(tau_net > 0.0) {
        return f64::INFINITY;
    }
    workload.epoch_factor * profile.dataset_size as f64 * workload.flops_per_sample
        / (profile.gpu.peak_flops() * tau_net)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Probability that utilization drawn from `dist` reaches `eta_threshold`.
pub fn compliance_probability(eta_threshold: f64, dist: &EfficiencyDistribution) -> f64 {
    if eta_threshold == f64::INFINITY {
        return 0.0;
    }
    1.0 - std_normal_cdf((eta_threshold - dist.mean) / dist.std_dev)
}

/// Score every candidate and keep those whose compliance probability
/// reaches the policy floor. Decisions come back in candidate order.
pub fn probselect(
    candidates: &[DeviceProfile],
    workload: &Workload,
    slo: &SloPolicy,
    dist: &EfficiencyDistribution,
) -> Vec<SelectionDecision> {
    candidates
        .iter()
        .map(|profile| {
            let eta = efficiency_threshold(profile, workload, slo);
            let p = compliance_probability(eta, dist);
            SelectionDecision {
                device_id: profile.device_id.clone(),
                efficiency_threshold: Some(eta),
                compliance_probability: p,
                selected: p >= slo.probability_threshold,
            }
        })
        .collect()
}

/// Baseline selector: keep everyone, or a uniform subsample when
/// `subsample_fraction < 1`. Probabilities are reported as 1.0 because the
/// baseline asserts every pick will comply.
pub fn fedlim_select<R: Rng + ?Sized>(
    candidates: &[DeviceProfile],
    subsample_fraction: f64,
    rng: &mut R,
) -> Vec<SelectionDecision> {
    let n = candidates.len();
    let take = if subsample_fraction >= 1.0 {
        n
    } else {
        ((subsample_fraction * n as f64).round() as usize).min(n)
    };
    let mut selected = vec![false; n];
    if take >= n {
        selected.fill(true);
    } else if take > 0 {
        for idx in rand::seq::index::sample(rng, n, take) {
            selected[idx] = true;
        }
    }
    candidates
        .iter()
        .zip(selected)
        .map(|(profile, selected)| SelectionDecision {
            device_id: profile.device_id.clone(),
            efficiency_threshold: None,
            compliance_probability: 1.0,
            selected,
        })
        .collect()
}
