use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bandwidth must be positive, got {0} bit/s")]
    NonPositiveBandwidth(f64),

    #[error("efficiency must lie in (0, 1], got {0}")]
    EfficiencyOutOfRange(f64),

    #[error(
        "measured compute time {measured} s does not exceed the data-movement \
         overhead {overhead} s, no efficiency can explain it"
    )]
    InfeasibleMeasurement { measured: f64, overhead: f64 },

    #[error("invalid gpu spec `{name}`: {reason}")]
    InvalidGpuSpec { name: String, reason: String },

    #[error("invalid workload `{name}`: {reason}")]
    InvalidWorkload { name: String, reason: String },

    #[error("invalid device profile `{device_id}`: {reason}")]
    InvalidDeviceProfile { device_id: String, reason: String },

    #[error("invalid slo policy: {0}")]
    InvalidSloPolicy(String),

    #[error("invalid efficiency distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid ground-truth model: {0}")]
    InvalidGroundTruth(String),

    #[error("invalid fleet config: {0}")]
    InvalidFleetConfig(String),

    #[error("invalid experiment config: {0}")]
    InvalidExperimentConfig(String),

    #[error("unknown gpu `{0}`")]
    UnknownGpu(String),

    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),

    #[error("cannot sample {requested} candidates from a fleet of {available}")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("measurement csv row {line}: {reason}")]
    MalformedMeasurement { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
