//! Command-line interface: experiment runner plus small calculator
//! subcommands over the same library code.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::engine::{self, ExperimentConfig, GroundTruthModel, Policy};
use crate::error::{Error, Result};
use crate::fleet::{self, FleetConfig};
use crate::model::{self, DeviceProfile, Workload};
use crate::selection::{self, EfficiencyDistribution, SloPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "probselect",
    version,
    about = "Deadline-aware probabilistic client selection for GPU fleets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulated federated experiment from a JSON config.
    Run(RunArgs),
    /// Print the latency breakdown for one device running one workload.
    Predict(PredictArgs),
    /// Score every catalog GPU against a deadline.
    Thresholds(ThresholdsArgs),
    /// Recover FLOP utilization from measured training times.
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for report.json, rounds.csv, and fleet.json. Overrides the
    /// config's output_dir; artifacts are skipped when neither is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run a single policy (or both) regardless of the config.
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Override the config's round count.
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Disable compute-phase jitter.
    #[arg(long)]
    pub no_jitter: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Probselect,
    Fedlim,
    Both,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Catalog GPU name, e.g. "RTX 4090".
    #[arg(long)]
    pub gpu: String,
    /// Catalog workload name, e.g. "ResNet-50".
    #[arg(long)]
    pub workload: String,
    /// Assumed FLOP utilization, in (0, 1].
    #[arg(long)]
    pub eta: f64,
    /// Uplink bandwidth in bits/s.
    #[arg(long)]
    pub up_bps: f64,
    /// Downlink bandwidth in bits/s.
    #[arg(long)]
    pub down_bps: f64,
    /// Scale on the per-sample work.
    #[arg(long, default_value_t = 1.0)]
    pub epoch_factor: f64,
}

#[derive(Debug, Args)]
pub struct ThresholdsArgs {
    /// Catalog workload name.
    #[arg(long)]
    pub workload: String,
    /// Deadline in seconds (default: the workload's stock deadline).
    #[arg(long)]
    pub tau_slo: Option<f64>,
    /// Selection probability floor (default: the workload's stock floor).
    #[arg(long)]
    pub p_slo: Option<f64>,
    /// Uplink bandwidth in bits/s.
    #[arg(long)]
    pub up_bps: f64,
    /// Downlink bandwidth in bits/s.
    #[arg(long)]
    pub down_bps: f64,
    /// Mean of the assumed utilization distribution.
    #[arg(long, default_value_t = 0.5)]
    pub mean: f64,
    /// Standard deviation of the assumed utilization distribution.
    #[arg(long, default_value_t = 0.25)]
    pub std_dev: f64,
    /// Scale on the per-sample work.
    #[arg(long, default_value_t = 1.0)]
    pub epoch_factor: f64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// CSV with header device_id,gpu_name,workload_name,measured_compute_seconds.
    pub csv: PathBuf,
    /// Also write the results as a JSON array.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Scale on the per-sample work used during the measurement.
    #[arg(long, default_value_t = 1.0)]
    pub epoch_factor: f64,
    /// Dataset size used during the measurement (default: the workload's).
    #[arg(long)]
    pub dataset: Option<u64>,
}

/// On-disk experiment config. Everything except the workload is optional
/// and falls back to stock values.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfigFile {
    workload: WorkloadRef,
    /// Applied on top of the workload, whether named or inline.
    epoch_factor: Option<f64>,
    slo: Option<SloOverride>,
    ground_truth: Option<GroundTruthOverride>,
    fleet: Option<FleetOverride>,
    policies: Option<Vec<Policy>>,
    rounds: Option<u32>,
    seed: Option<u64>,
    fedlim_subsample_fraction: Option<f64>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WorkloadRef {
    Name(String),
    Inline(Workload),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SloOverride {
    deadline_s: Option<f64>,
    probability_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthOverride {
    mean: Option<f64>,
    std_dev: Option<f64>,
    efficiency_clamp: Option<(f64, f64)>,
    jitter_range: Option<(f64, f64)>,
    jitter_enabled: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetOverride {
    fleet_size: Option<usize>,
    gpu_mix: Option<Vec<(String, f64)>>,
    candidates_per_round: Option<usize>,
    upload_range_bps: Option<(f64, f64)>,
    download_range_bps: Option<(f64, f64)>,
    dataset_multiplier_range: Option<(f64, f64)>,
}

fn resolve_config(file: ExperimentConfigFile) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let mut workload = match file.workload {
        WorkloadRef::Name(name) => fleet::workload_by_name(&name)?,
        WorkloadRef::Inline(w) => w,
    };
    if let Some(ef) = file.epoch_factor {
        workload.epoch_factor = ef;
    }

    let stock_slo = fleet::default_slo(&workload.name).ok();
    let over = file.slo.unwrap_or_default();
    let slo = match (stock_slo, over.deadline_s, over.probability_threshold) {
        (_, Some(d), Some(p)) => SloPolicy::new(d, p)?,
        (Some(stock), d, p) => SloPolicy::new(
            d.unwrap_or(stock.deadline_s),
            p.unwrap_or(stock.probability_threshold),
        )?,
        (None, _, _) => {
            return Err(Error::InvalidExperimentConfig(format!(
                "workload {:?} has no stock deadline; set slo.deadline_s and \
                 slo.probability_threshold explicitly",
                workload.name
            )))
        }
    };

    let mut ground_truth = GroundTruthModel::default();
    if let Some(gt) = file.ground_truth {
        let mut dist = ground_truth.efficiency_dist;
        if let Some(mean) = gt.mean {
            dist.mean = mean;
        }
        if let Some(std_dev) = gt.std_dev {
            dist.std_dev = std_dev;
        }
        ground_truth.efficiency_dist = dist;
        if let Some(clamp) = gt.efficiency_clamp {
            ground_truth.efficiency_clamp = clamp;
        }
        if let Some(range) = gt.jitter_range {
            ground_truth.jitter_range = range;
        }
        if let Some(enabled) = gt.jitter_enabled {
            ground_truth.jitter_enabled = enabled;
        }
    }

    let mut fleet_config = FleetConfig::default();
    if let Some(f) = file.fleet {
        if let Some(v) = f.fleet_size {
            fleet_config.fleet_size = v;
        }
        if let Some(v) = f.gpu_mix {
            fleet_config.gpu_mix = v;
        }
        if let Some(v) = f.candidates_per_round {
            fleet_config.candidates_per_round = v;
        }
        if let Some(v) = f.upload_range_bps {
            fleet_config.upload_range_bps = v;
        }
        if let Some(v) = f.download_range_bps {
            fleet_config.download_range_bps = v;
        }
        if let Some(v) = f.dataset_multiplier_range {
            fleet_config.dataset_multiplier_range = v;
        }
    }

    let seed = file.seed.unwrap_or(42);
    fleet_config.seed = seed;

    let config = ExperimentConfig {
        workload,
        slo,
        fleet: fleet_config,
        ground_truth,
        policies: file
            .policies
            .unwrap_or_else(|| vec![Policy::Probselect, Policy::Fedlim]),
        rounds: file.rounds.unwrap_or(100),
        seed,
        fedlim_subsample_fraction: file.fedlim_subsample_fraction.unwrap_or(1.0),
    };
    config.validate()?;
    Ok((config, file.output_dir))
}

/// Loads and validates an experiment config, returning it along with the
/// config's own output directory, if any.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let text = fs::read_to_string(path)?;
    let file: ExperimentConfigFile = serde_json::from_str(&text)?;
    resolve_config(file)
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let (mut config, out_from_file) = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.fleet.seed = seed;
    }
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
    }
    if args.no_jitter {
        config.ground_truth.jitter_enabled = false;
    }
    if let Some(policy) = args.policy {
        config.policies = match policy {
            PolicyArg::Probselect => vec![Policy::Probselect],
            PolicyArg::Fedlim => vec![Policy::Fedlim],
            PolicyArg::Both => vec![Policy::Probselect, Policy::Fedlim],
        };
    }

    let reports = engine::run_experiment(&config)?;
    print!("{}", engine::render_summary(&reports));

    if let Some(dir) = args.out.clone().or(out_from_file) {
        fs::create_dir_all(&dir)?;
        let fleet_devices = fleet::generate_fleet(&config.fleet, &config.workload)?;
        fleet::export_fleet(&dir.join("fleet.json"), &fleet_devices)?;
        engine::write_reports_json(&dir.join("report.json"), &reports)?;
        engine::write_rounds_csv(&dir.join("rounds.csv"), &reports)?;
        println!("artifacts written to {}", dir.display());
    }
    Ok(0)
}

fn cmd_predict(args: &PredictArgs) -> Result<i32> {
    let gpu = fleet::gpu_by_name(&args.gpu)?;
    let mut workload = fleet::workload_by_name(&args.workload)?;
    workload.epoch_factor = args.epoch_factor;
    let profile = DeviceProfile::new(
        "cli",
        Arc::new(gpu),
        args.up_bps,
        args.down_bps,
        workload.dataset_size,
    )?;
    let b = model::total_latency(&profile, &workload, args.eta)?;
    println!("download_s {:.6}", b.download_s);
    println!("compute_s  {:.6}", b.compute_s);
    println!("upload_s   {:.6}", b.upload_s);
    println!("total_s    {:.6}", b.total_s);
    Ok(0)
}

fn cmd_thresholds(args: &ThresholdsArgs) -> Result<i32> {
    let mut workload = fleet::workload_by_name(&args.workload)?;
    workload.epoch_factor = args.epoch_factor;
    let stock = fleet::default_slo(&workload.name)?;
    let slo = SloPolicy::new(
        args.tau_slo.unwrap_or(stock.deadline_s),
        args.p_slo.unwrap_or(stock.probability_threshold),
    )?;
    let dist = EfficiencyDistribution::new(args.mean, args.std_dev)?;

    println!(
        "workload {} deadline_s {} p_floor {}",
        workload.name, slo.deadline_s, slo.probability_threshold
    );
    println!(
        "{:<12} {:>14} {:>13} {:>9}",
        "gpu", "eta_threshold", "compliance_p", "selected"
    );
    for gpu in fleet::gpu_catalog() {
        let profile = DeviceProfile::new(
            "cli",
            Arc::new(gpu.clone()),
            args.up_bps,
            args.down_bps,
            workload.dataset_size,
        )?;
        let eta = selection::efficiency_threshold(&profile, &workload, &slo);
        let p = selection::compliance_probability(eta, &dist);
        let eta_text = if eta.is_infinite() {
            "inf".to_string()
        } else {
            format!("{eta:.6}")
        };
        println!(
            "{:<12} {:>14} {:>13.6} {:>9}",
            gpu.name,
            eta_text,
            p,
            p >= slo.probability_threshold
        );
    }
    Ok(0)
}

const MEASUREMENT_HEADER: &str = "device_id,gpu_name,workload_name,measured_compute_seconds";

#[derive(Debug)]
struct MeasurementRow {
    device_id: String,
    gpu_name: String,
    workload_name: String,
    measured_seconds: f64,
}

fn parse_measurements(path: &Path) -> Result<Vec<MeasurementRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == MEASUREMENT_HEADER => {}
        Some((_, header)) => {
            return Err(Error::MalformedMeasurement {
                line: 1,
                reason: format!("expected header {MEASUREMENT_HEADER:?}, got {header:?}"),
            })
        }
        None => {
            return Err(Error::MalformedMeasurement {
                line: 1,
                reason: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedMeasurement {
                line: idx + 1,
                reason: format!("expected 4 comma-separated fields, got {}", fields.len()),
            });
        }
        let measured_seconds: f64 =
            fields[3]
                .trim()
                .parse()
                .map_err(|_| Error::MalformedMeasurement {
                    line: idx + 1,
                    reason: format!("measured_compute_seconds is not a number: {:?}", fields[3]),
                })?;
        rows.push(MeasurementRow {
            device_id: fields[0].trim().to_string(),
            gpu_name: fields[1].trim().to_string(),
            workload_name: fields[2].trim().to_string(),
            measured_seconds,
        });
    }
    Ok(rows)
}

/// One extraction result, as printed and as written with `--json`.
#[derive(Debug, Serialize)]
struct ExtractRecord {
    device_id: String,
    gpu_name: String,
    workload_name: String,
    measured_seconds: f64,
    efficiency: Option<f64>,
    status: String,
}

fn cmd_extract(args: &ExtractArgs) -> Result<i32> {
    let rows = parse_measurements(&args.csv)?;
    let mut records = Vec::with_capacity(rows.len());
    let mut any_infeasible = false;

    println!("device_id,gpu_name,workload_name,efficiency,status");
    for row in rows {
        let gpu = fleet::gpu_by_name(&row.gpu_name)?;
        let mut workload = fleet::workload_by_name(&row.workload_name)?;
        workload.epoch_factor = args.epoch_factor;
        let dataset = args.dataset.unwrap_or(workload.dataset_size);
        // bandwidths play no part in extraction; placeholders keep the
        // profile constructor happy
        let profile = DeviceProfile::new(row.device_id.clone(), Arc::new(gpu), 1.0, 1.0, dataset)?;

        let (efficiency, status) =
            match model::extract_efficiency(row.measured_seconds, &profile, &workload) {
                Ok(eta) if eta > 1.0 => (Some(eta), "implausible: exceeds peak".to_string()),
                Ok(eta) => (Some(eta), "ok".to_string()),
                Err(Error::InfeasibleMeasurement { overhead, .. }) => {
                    any_infeasible = true;
                    (
                        None,
                        format!("infeasible: at or below the {overhead:.6}s data-movement floor"),
                    )
                }
                Err(e) => return Err(e),
            };
        println!(
            "{},{},{},{},{}",
            row.device_id,
            row.gpu_name,
            row.workload_name,
            efficiency.map(|e| format!("{e:.6}")).unwrap_or_default(),
            status
        );
        records.push(ExtractRecord {
            device_id: row.device_id,
            gpu_name: row.gpu_name,
            workload_name: row.workload_name,
            measured_seconds: row.measured_seconds,
            efficiency,
            status,
        });
    }

    if let Some(path) = &args.json {
        let mut writer = std::io::BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut writer, &records)?;
        std::io::Write::write_all(&mut writer, b"\n")?;
    }
    Ok(if any_infeasible { 1 } else { 0 })
}

/// Executes a parsed command line and returns the process exit code:
/// 0 success (for extract: all rows feasible), 1 extract saw infeasible
/// rows, 2 invalid input, 3 I/O failure.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Thresholds(args) => cmd_thresholds(args),
        Command::Extract(args) => cmd_extract(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => 3,
                _ => 2,
            }
        }
    }
}
