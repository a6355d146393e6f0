//! Experiment engine: simulates federated rounds against a hidden ground
//! truth, runs each selection policy on an identical environment, and
//! aggregates deadline-compliance metrics.
//!
//! Reproducibility contract: everything is a pure function of the config.
//! Each round derives its own random streams from `(seed, lane, round)`, so
//! rounds can run in parallel and still produce byte-identical artifacts.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::{self, FleetConfig, FleetDevice};
use crate::model::{self, DeviceProfile, Workload};
use crate::selection::{self, EfficiencyDistribution, SloPolicy};
use crate::stream::{stream_rng, LANE_ENV, LANE_FEDLIM};

/// Hidden state of the world: how device efficiency and runtime noise are
/// actually distributed. Policies only ever see `efficiency_dist`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    /// True (and, here, correctly believed) utilization distribution.
    pub efficiency_dist: EfficiencyDistribution,
    /// Draws are clamped into this range; must sit inside (0, 1].
    pub efficiency_clamp: (f64, f64),
    /// Multiplicative noise on the compute phase, drawn uniformly.
    pub jitter_range: (f64, f64),
    pub jitter_enabled: bool,
}

impl Default for GroundTruthModel {
    fn default() -> Self {
        Self {
            efficiency_dist: EfficiencyDistribution {
                mean: 0.5,
                std_dev: 0.25,
            },
            efficiency_clamp: (0.01, 1.0),
            jitter_range: (0.8, 1.2),
            jitter_enabled: true,
        }
    }
}

impl GroundTruthModel {
    pub fn validate(&self) -> Result<()> {
        EfficiencyDistribution::new(self.efficiency_dist.mean, self.efficiency_dist.std_dev)?;
        let (lo, hi) = self.efficiency_clamp;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidGroundTruth(format!(
                "efficiency_clamp must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"
            )));
        }
        let (jlo, jhi) = self.jitter_range;
        if !(jlo > 0.0 && jlo <= jhi && jhi.is_finite()) {
            return Err(Error::InvalidGroundTruth(format!(
                "jitter_range must satisfy 0 < lo <= hi, got ({jlo}, {jhi})"
            )));
        }
        Ok(())
    }
}

/// Box-Muller transform over two raw uniforms.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// One Gaussian efficiency draw, clamped into the model's valid range.
pub fn draw_true_efficiency<R: Rng + ?Sized>(gt: &GroundTruthModel, rng: &mut R) -> f64 {
    let (lo, hi) = gt.efficiency_clamp;
    let z = standard_normal(rng);
    (gt.efficiency_dist.mean + gt.efficiency_dist.std_dev * z).clamp(lo, hi)
}

/// What the round actually costs on this device: a fresh efficiency draw,
/// plus uniform jitter on the compute phase when enabled. Network phases
/// are left noise-free; bandwidth variation already covers them.
pub fn simulate_actual_latency<R: Rng + ?Sized>(
    profile: &DeviceProfile,
    workload: &Workload,
    gt: &GroundTruthModel,
    rng: &mut R,
) -> f64 {
    let eta = draw_true_efficiency(gt, rng);
    let b =
        model::total_latency(profile, workload, eta).expect("clamped draw is a valid efficiency");
    let jitter = if gt.jitter_enabled {
        let (lo, hi) = gt.jitter_range;
        rng.random_range(lo..=hi)
    } else {
        1.0
    };
    b.download_s + b.compute_s * jitter + b.upload_s
}

/// Selection policy under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Probselect,
    Fedlim,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Probselect => "probselect",
            Policy::Fedlim => "fedlim",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probselect" => Ok(Policy::Probselect),
            "fedlim" => Ok(Policy::Fedlim),
            other => Err(Error::InvalidExperimentConfig(format!(
                "unknown policy {other:?}, expected \"probselect\" or \"fedlim\""
            ))),
        }
    }
}

/// Everything that happened to one candidate in one round. Latency and
/// deadline fields are populated only for selected devices; unselected
/// devices never run, so there is nothing to measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceOutcome {
    pub device_id: String,
    pub gpu_name: String,
    pub selected: bool,
    /// Policy's compliance estimate (1.0 for the baseline, by fiat).
    pub predicted_p: f64,
    pub eta_threshold: Option<f64>,
    pub actual_latency_s: Option<f64>,
    pub met_deadline: Option<bool>,
}

/// All candidate outcomes of one round under one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub round: u32,
    pub policy: Policy,
    pub outcomes: Vec<DeviceOutcome>,
}

/// Borrowed bundle of the per-round inputs.
#[derive(Debug, Clone, Copy)]
pub struct RoundParams<'a> {
    pub workload: &'a Workload,
    pub slo: &'a SloPolicy,
    pub ground_truth: &'a GroundTruthModel,
    pub fleet_config: &'a FleetConfig,
    pub fedlim_fraction: f64,
}

/// Runs one round under one policy.
///
/// The environment (candidate set, bandwidths, true latencies) comes from
/// the `(seed, env-lane, round)` stream and is drawn for every candidate
/// before any selection happens, so both policies face exactly the same
/// world in a given round. The baseline's subsampling uses its own lane and
/// cannot disturb the environment.
pub fn run_round(
    fleet: &[FleetDevice],
    params: &RoundParams<'_>,
    policy: Policy,
    round: u32,
    master_seed: u64,
) -> Result<RoundResult> {
    let mut env = stream_rng(master_seed, LANE_ENV, round as u64);
    let candidates =
        fleet::sample_candidates(fleet, params.fleet_config.candidates_per_round, &mut env)?;
    let profiles: Vec<DeviceProfile> = candidates
        .iter()
        .map(|d| fleet::sample_bandwidths(d, params.fleet_config, &mut env))
        .collect();
    let actuals: Vec<f64> = profiles
        .iter()
        .map(|p| simulate_actual_latency(p, params.workload, params.ground_truth, &mut env))
        .collect();

    let decisions = match policy {
        Policy::Probselect => selection::probselect(
            &profiles,
            params.workload,
            params.slo,
            &params.ground_truth.efficiency_dist,
        ),
        Policy::Fedlim => {
            let mut subsample = stream_rng(master_seed, LANE_FEDLIM, round as u64);
            selection::fedlim_select(&profiles, params.fedlim_fraction, &mut subsample)
        }
    };

    let outcomes = profiles
        .iter()
        .zip(decisions)
        .zip(actuals)
        .map(|((profile, decision), actual)| DeviceOutcome {
            device_id: decision.device_id,
            gpu_name: profile.gpu.name.clone(),
            selected: decision.selected,
            predicted_p: decision.compliance_probability,
            eta_threshold: decision.efficiency_threshold,
            actual_latency_s: decision.selected.then_some(actual),
            met_deadline: decision.selected.then_some(actual <= params.slo.deadline_s),
        })
        .collect();

    Ok(RoundResult {
        round,
        policy,
        outcomes,
    })
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub workload: Workload,
    pub slo: SloPolicy,
    pub fleet: FleetConfig,
    pub ground_truth: GroundTruthModel,
    pub policies: Vec<Policy>,
    pub rounds: u32,
    pub seed: u64,
    /// Fraction of candidates the baseline keeps, in (0, 1].
    pub fedlim_subsample_fraction: f64,
}

impl ExperimentConfig {
    /// Stock experiment for a catalog workload: default fleet and ground
    /// truth, stock deadline, both policies, 100 rounds.
    pub fn for_workload(workload_name: &str) -> Result<Self> {
        Ok(Self {
            workload: fleet::workload_by_name(workload_name)?,
            slo: fleet::default_slo(workload_name)?,
            fleet: FleetConfig::default(),
            ground_truth: GroundTruthModel::default(),
            policies: vec![Policy::Probselect, Policy::Fedlim],
            rounds: 100,
            seed: 42,
            fedlim_subsample_fraction: 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        // serde bypasses the validating constructors, so re-run them
        let w = &self.workload;
        Workload::new(
            w.name.clone(),
            w.model_size_bytes,
            w.flops_per_sample,
            w.sample_size_bytes,
            w.dataset_size,
            w.epoch_factor,
        )?;
        SloPolicy::new(self.slo.deadline_s, self.slo.probability_threshold)?;
        self.fleet.validate()?;
        self.ground_truth.validate()?;
        if self.policies.is_empty() {
            return Err(Error::InvalidExperimentConfig(
                "policies must not be empty".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.policies {
            if !seen.insert(*p) {
                return Err(Error::InvalidExperimentConfig(format!(
                    "policy {p} listed more than once"
                )));
            }
        }
        let f = self.fedlim_subsample_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidExperimentConfig(format!(
                "fedlim_subsample_fraction must be in (0, 1], got {f}"
            )));
        }
        Ok(())
    }
}

/// How rounds are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Sequential,
    Parallel,
}

/// Aggregated result of running one policy through all rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub policy: Policy,
    pub rounds: u32,
    pub selected_total: u64,
    pub compliant_total: u64,
    /// Fraction of selected work that met the deadline; absent when nothing
    /// was selected.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slo_compliance_rate: Option<f64>,
    /// Fraction of selected work that blew the deadline (wasted GPU time).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub computational_waste_rate: Option<f64>,
    #[serde(skip)]
    pub round_results: Vec<RoundResult>,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, policy: Policy, round_results: Vec<RoundResult>) -> Self {
        let selected_total = round_results
            .iter()
            .flat_map(|r| &r.outcomes)
            .filter(|o| o.selected)
            .count() as u64;
        let compliant_total = round_results
            .iter()
            .flat_map(|r| &r.outcomes)
            .filter(|o| o.met_deadline == Some(true))
            .count() as u64;
        let slo_compliance_rate = compliance_rate(&round_results);
        Self {
            rounds: config.rounds,
            config,
            policy,
            selected_total,
            compliant_total,
            slo_compliance_rate,
            computational_waste_rate: slo_compliance_rate.map(|c| 1.0 - c),
            round_results,
        }
    }
}

/// Selected-and-met over selected, across all rounds. `None` when the
/// policy never selected anything (the rate is undefined, not zero).
pub fn compliance_rate(rounds: &[RoundResult]) -> Option<f64> {
    let mut selected = 0u64;
    let mut met = 0u64;
    for outcome in rounds.iter().flat_map(|r| &r.outcomes) {
        if outcome.selected {
            selected += 1;
            if outcome.met_deadline == Some(true) {
                met += 1;
            }
        }
    }
    (selected > 0).then(|| met as f64 / selected as f64)
}

/// Complement of the compliance rate.
pub fn waste_rate(rounds: &[RoundResult]) -> Option<f64> {
    compliance_rate(rounds).map(|c| 1.0 - c)
}

/// How much of the baseline's waste the candidate removes:
/// `(waste_baseline - waste_candidate) / waste_baseline`. `None` when the
/// baseline wasted nothing.
pub fn relative_waste_reduction(waste_candidate: f64, waste_baseline: f64) -> Option<f64> {
    (waste_baseline != 0.0).then(|| (waste_baseline - waste_candidate) / waste_baseline)
}

/// Runs every configured policy over the same simulated environment.
/// Reports come back in `config.policies` order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    run_experiment_with_mode(config, ExecutionMode::Parallel)
}

pub fn run_experiment_with_mode(
    config: &ExperimentConfig,
    mode: ExecutionMode,
) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    let fleet = fleet::generate_fleet(&config.fleet, &config.workload)?;
    let params = RoundParams {
        workload: &config.workload,
        slo: &config.slo,
        ground_truth: &config.ground_truth,
        fleet_config: &config.fleet,
        fedlim_fraction: config.fedlim_subsample_fraction,
    };
    config
        .policies
        .iter()
        .map(|&policy| {
            let round_results: Result<Vec<RoundResult>> = match mode {
                ExecutionMode::Sequential => (0..config.rounds)
                    .map(|r| run_round(&fleet, &params, policy, r, config.seed))
                    .collect(),
                ExecutionMode::Parallel => (0..config.rounds)
                    .into_par_iter()
                    .map(|r| run_round(&fleet, &params, policy, r, config.seed))
                    .collect(),
            };
            Ok(ExperimentReport::new(
                config.clone(),
                policy,
                round_results?,
            ))
        })
        .collect()
}

fn display_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per candidate per round per policy.
pub fn write_rounds_csv(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "round,policy,device_id,gpu_name,selected,predicted_p,eta_threshold,actual_latency_s,met_deadline"
    )?;
    for report in reports {
        for round in &report.round_results {
            for o in &round.outcomes {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    round.round,
                    round.policy,
                    o.device_id,
                    o.gpu_name,
                    o.selected,
                    o.predicted_p,
                    display_opt(&o.eta_threshold),
                    display_opt(&o.actual_latency_s),
                    display_opt(&o.met_deadline),
                )?;
            }
        }
    }
    Ok(())
}

/// Writes the report array as pretty JSON.
pub fn write_reports_json(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, reports)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Human-readable per-policy table plus the head-to-head waste line.
pub fn render_summary(reports: &[ExperimentReport]) -> String {
    let fmt_rate = |v: Option<f64>| match v {
        Some(x) => format!("{x:.6}"),
        None => "n/a".to_string(),
    };
    let mut out = String::new();
    out.push_str("policy       rounds  selected  compliant  compliance      waste\n");
    for r in reports {
        out.push_str(&format!(
            "{:<11} {:>7} {:>9} {:>10} {:>11} {:>10}\n",
            r.policy.to_string(),
            r.rounds,
            r.selected_total,
            r.compliant_total,
            fmt_rate(r.slo_compliance_rate),
            fmt_rate(r.computational_waste_rate),
        ));
    }
    let probselect = reports.iter().find(|r| r.policy == Policy::Probselect);
    let fedlim = reports.iter().find(|r| r.policy == Policy::Fedlim);
    if let (Some(ps), Some(fl)) = (probselect, fedlim) {
        if let (Some(wc), Some(wb)) = (ps.computational_waste_rate, fl.computational_waste_rate) {
            let line = match relative_waste_reduction(wc, wb) {
                Some(red) => format!("relative waste reduction (probselect vs fedlim): {red:.6}"),
                None => {
                    "relative waste reduction (probselect vs fedlim): n/a (baseline waste is zero)"
                        .to_string()
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config(workload_name: &str, epoch_factor: f64, seed: u64) -> ExperimentConfig {
        let mut config = ExperimentConfig::for_workload(workload_name).unwrap();
        config.workload.epoch_factor = epoch_factor;
        config.rounds = 10;
        config.seed = seed;
        config.fleet.seed = seed;
        config
    }

    #[test]
    fn efficiency_draws_respect_clamp_and_mean() {
        let gt = GroundTruthModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 20_000;
        let mut sum = 0.0;
        let mut clamped = 0u32;
        for _ in 0..n {
            let eta = draw_true_efficiency(&gt, &mut rng);
            assert!((0.01..=1.0).contains(&eta));
            sum += eta;
            if eta == 0.01 || eta == 1.0 {
                clamped += 1;
            }
        }
        let mean = sum / n as f64;
        // clamp is asymmetric (truncates more of the upper tail), so the
        // observed mean sits slightly below 0.5
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
        let clamp_rate = clamped as f64 / n as f64;
        assert!(clamp_rate > 0.01 && clamp_rate < 0.08, "rate {clamp_rate}");
    }

    #[test]
    fn simulation_without_jitter_matches_the_model_exactly() {
        let workload = fleet::workload_by_name("MobileNetV2").unwrap();
        let config = FleetConfig::default();
        let fleet_devices = fleet::generate_fleet(&config, &workload).unwrap();
        let gt = GroundTruthModel {
            efficiency_clamp: (0.37, 0.37),
            jitter_enabled: false,
            ..GroundTruthModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for device in fleet_devices.iter().take(50) {
            let profile = fleet::sample_bandwidths(device, &config, &mut rng);
            let simulated = simulate_actual_latency(&profile, &workload, &gt, &mut rng);
            let expected = model::total_latency(&profile, &workload, 0.37)
                .unwrap()
                .total_s;
            assert_eq!(simulated, expected);
        }
    }

    #[test]
    fn jitter_scales_only_the_compute_phase() {
        let workload = fleet::workload_by_name("MobileNetV2").unwrap();
        let config = FleetConfig::default();
        let fleet_devices = fleet::generate_fleet(&config, &workload).unwrap();
        let gt = GroundTruthModel {
            efficiency_clamp: (0.5, 0.5),
            ..GroundTruthModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for device in fleet_devices.iter().take(200) {
            let profile = fleet::sample_bandwidths(device, &config, &mut rng);
            let b = model::total_latency(&profile, &workload, 0.5).unwrap();
            let simulated = simulate_actual_latency(&profile, &workload, &gt, &mut rng);
            let compute_part = simulated - b.download_s - b.upload_s;
            let ratio = compute_part / b.compute_s;
            assert!((0.8..=1.2 + 1e-12).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn both_policies_face_the_same_environment() {
        let mut config = small_config("MobileNetV2", 4.0, 7);
        // force probselect to select everyone so actuals are fully visible
        config.slo.probability_threshold = 0.0;
        let fleet_devices = fleet::generate_fleet(&config.fleet, &config.workload).unwrap();
        let params = RoundParams {
            workload: &config.workload,
            slo: &config.slo,
            ground_truth: &config.ground_truth,
            fleet_config: &config.fleet,
            fedlim_fraction: 1.0,
        };
        for round in 0..5 {
            let a = run_round(
                &fleet_devices,
                &params,
                Policy::Probselect,
                round,
                config.seed,
            )
            .unwrap();
            let b = run_round(&fleet_devices, &params, Policy::Fedlim, round, config.seed).unwrap();
            assert_eq!(a.outcomes.len(), b.outcomes.len());
            for (oa, ob) in a.outcomes.iter().zip(&b.outcomes) {
                assert_eq!(oa.device_id, ob.device_id);
                assert_eq!(oa.gpu_name, ob.gpu_name);
                assert!(oa.selected && ob.selected);
                assert_eq!(oa.actual_latency_s, ob.actual_latency_s);
                assert_eq!(oa.met_deadline, ob.met_deadline);
            }
        }
    }

    #[test]
    fn candidate_sets_differ_between_rounds() {
        let config = small_config("MobileNetV2", 4.0, 7);
        let fleet_devices = fleet::generate_fleet(&config.fleet, &config.workload).unwrap();
        let params = RoundParams {
            workload: &config.workload,
            slo: &config.slo,
            ground_truth: &config.ground_truth,
            fleet_config: &config.fleet,
            fedlim_fraction: 1.0,
        };
        let r0 = run_round(&fleet_devices, &params, Policy::Fedlim, 0, config.seed).unwrap();
        let r1 = run_round(&fleet_devices, &params, Policy::Fedlim, 1, config.seed).unwrap();
        let ids = |r: &RoundResult| {
            r.outcomes
                .iter()
                .map(|o| o.device_id.clone())
                .collect::<Vec<_>>()
        };
        assert_ne!(ids(&r0), ids(&r1));
    }

    #[test]
    fn experiment_is_deterministic_and_parallel_agnostic() {
        let config = small_config("MobileNetV2", 4.0, 11);
        let a = run_experiment_with_mode(&config, ExecutionMode::Sequential).unwrap();
        let b = run_experiment_with_mode(&config, ExecutionMode::Parallel).unwrap();
        let c = run_experiment(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);

        let dir = tempfile::tempdir().unwrap();
        let csv_a = dir.path().join("a.csv");
        let csv_b = dir.path().join("b.csv");
        write_rounds_csv(&csv_a, &a).unwrap();
        write_rounds_csv(&csv_b, &b).unwrap();
        assert_eq!(
            std::fs::read(&csv_a).unwrap(),
            std::fs::read(&csv_b).unwrap()
        );
    }

    #[test]
    fn zero_rounds_leaves_rates_undefined() {
        let mut config = small_config("MobileNetV2", 4.0, 3);
        config.rounds = 0;
        let reports = run_experiment(&config).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.selected_total, 0);
            assert_eq!(r.slo_compliance_rate, None);
            assert_eq!(r.computational_waste_rate, None);
        }
        let json = serde_json::to_string(&reports).unwrap();
        assert!(!json.contains("slo_compliance_rate"));
        assert!(!json.contains("computational_waste_rate"));
        let summary = render_summary(&reports);
        assert!(summary.contains("n/a"));
    }

    #[test]
    fn metrics_arithmetic_on_synthetic_rounds() {
        let outcome = |selected: bool, met: Option<bool>| DeviceOutcome {
            device_id: "d".into(),
            gpu_name: "g".into(),
            selected,
            predicted_p: 0.5,
            eta_threshold: None,
            actual_latency_s: met.map(|_| 1.0),
            met_deadline: met,
        };
        let rounds = vec![
            RoundResult {
                round: 0,
                policy: Policy::Probselect,
                outcomes: vec![
                    outcome(true, Some(true)),
                    outcome(true, Some(false)),
                    outcome(false, None),
                ],
            },
            RoundResult {
                round: 1,
                policy: Policy::Probselect,
                outcomes: vec![outcome(true, Some(true)), outcome(true, Some(true))],
            },
        ];
        assert_eq!(compliance_rate(&rounds), Some(0.75));
        assert_eq!(waste_rate(&rounds), Some(0.25));
        assert_eq!(compliance_rate(&[]), None);
        assert_eq!(relative_waste_reduction(0.1, 0.5), Some(0.8));
        assert_eq!(relative_waste_reduction(0.5, 0.5), Some(0.0));
        assert_eq!(relative_waste_reduction(0.1, 0.0), None);
    }

    #[test]
    fn selective_policy_beats_the_baseline_across_seeds() {
        let mut wins = 0;
        let seeds = 20;
        for seed in 0..seeds {
            let config = small_config("MobileNetV2", 4.0, seed);
            let reports = run_experiment(&config).unwrap();
            let ps = reports
                .iter()
                .find(|r| r.policy == Policy::Probselect)
                .unwrap();
            let fl = reports.iter().find(|r| r.policy == Policy::Fedlim).unwrap();
            assert!(ps.selected_total > 0, "seed {seed} selected nothing");
            if ps.slo_compliance_rate.unwrap() > fl.slo_compliance_rate.unwrap() {
                wins += 1;
            }
        }
        assert!(wins >= 16, "only {wins}/{seeds} seeds favored probselect");
    }

    #[test]
    fn fedlim_subsample_fraction_controls_volume() {
        let mut config = small_config("MobileNetV2", 4.0, 5);
        config.policies = vec![Policy::Fedlim];
        config.fedlim_subsample_fraction = 0.5;
        let reports = run_experiment(&config).unwrap();
        let per_round = config.fleet.candidates_per_round as u64 / 2;
        assert_eq!(reports[0].selected_total, config.rounds as u64 * per_round);
    }

    #[test]
    fn csv_rows_reproduce_report_totals() {
        let config = small_config("MobileNetV2", 4.0, 9);
        let reports = run_experiment(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rounds.csv");
        write_rounds_csv(&path, &reports).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "round,policy,device_id,gpu_name,selected,predicted_p,eta_threshold,actual_latency_s,met_deadline"
        );
        let mut selected = std::collections::HashMap::new();
        let mut compliant = std::collections::HashMap::new();
        let mut rows = 0;
        for line in lines {
            rows += 1;
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 9, "bad row: {line}");
            if fields[4] == "true" {
                *selected.entry(fields[1].to_string()).or_insert(0u64) += 1;
                assert!(!fields[7].is_empty());
                if fields[8] == "true" {
                    *compliant.entry(fields[1].to_string()).or_insert(0u64) += 1;
                }
            } else {
                assert!(fields[7].is_empty() && fields[8].is_empty());
            }
        }
        assert_eq!(
            rows,
            2 * config.rounds as usize * config.fleet.candidates_per_round
        );
        for r in &reports {
            let name = r.policy.to_string();
            assert_eq!(selected.get(&name).copied().unwrap_or(0), r.selected_total);
            assert_eq!(
                compliant.get(&name).copied().unwrap_or(0),
                r.compliant_total
            );
        }
    }

    #[test]
    fn report_json_round_trips() {
        let config = small_config("MobileNetV2", 4.0, 13);
        let reports = run_experiment(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_reports_json(&path, &reports).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
        let back: Vec<ExperimentReport> = serde_json::from_str(&text).unwrap();
        assert_eq!(back.len(), reports.len());
        for (orig, parsed) in reports.iter().zip(&back) {
            assert_eq!(parsed.policy, orig.policy);
            assert_eq!(parsed.selected_total, orig.selected_total);
            assert_eq!(parsed.compliant_total, orig.compliant_total);
            assert_eq!(parsed.slo_compliance_rate, orig.slo_compliance_rate);
            assert_eq!(parsed.config, orig.config);
            assert!(parsed.round_results.is_empty());
        }
    }

    #[test]
    fn policy_names_round_trip() {
        for p in [Policy::Probselect, Policy::Fedlim] {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{p}\""));
            assert_eq!(serde_json::from_str::<Policy>(&json).unwrap(), p);
        }
        assert!("FedLim".parse::<Policy>().is_err());
    }

    #[test]
    fn config_validation_catches_bad_experiments() {
        let ok = small_config("MobileNetV2", 4.0, 1);
        assert!(ok.validate().is_ok());

        let mut c = ok.clone();
        c.policies.clear();
        assert!(matches!(
            c.validate(),
            Err(Error::InvalidExperimentConfig(_))
        ));

        let mut c = ok.clone();
        c.policies = vec![Policy::Fedlim, Policy::Fedlim];
        assert!(c.validate().is_err());

        let mut c = ok.clone();
        c.fedlim_subsample_fraction = 0.0;
        assert!(c.validate().is_err());

        let mut c = ok.clone();
        c.fedlim_subsample_fraction = 1.5;
        assert!(c.validate().is_err());

        let mut c = ok.clone();
        c.slo.deadline_s = -1.0;
        assert!(matches!(c.validate(), Err(Error::InvalidSloPolicy(_))));

        let mut c = ok.clone();
        c.workload.epoch_factor = 0.0;
        assert!(matches!(c.validate(), Err(Error::InvalidWorkload { .. })));

        let mut c = ok.clone();
        c.ground_truth.efficiency_clamp = (0.0, 1.0);
        assert!(matches!(c.validate(), Err(Error::InvalidGroundTruth(_))));

        let mut c = ok;
        c.ground_truth.efficiency_clamp = (0.5, 1.5);
        assert!(c.validate().is_err());
    }
}
