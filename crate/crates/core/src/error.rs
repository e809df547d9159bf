use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("hex grid needs at least one ring")]
    ZeroRings,
    #[error("inter-site distance must be positive, got {0}")]
    InterSiteDistance(f64),
    #[error("eNB {enb}: alpha {alpha} outside (0, 1]")]
    InvalidAlpha { enb: usize, alpha: f64 },
    #[error("expected {expected} alpha values, got {got}")]
    AlphaCount { expected: usize, got: usize },
    #[error("band plan needs total_prbs = 3 x prbs_per_subband (got {total} and {per_subband})")]
    BandPlan { total: usize, per_subband: usize },
    #[error("eNB at index {index} carries id {id}")]
    IdOrder { index: usize, id: usize },
    #[error("eNBs {0} and {1} share a position")]
    CoincidentSites(usize, usize),
    #[error("invalid propagation parameters")]
    Propagation,
    #[error("invalid traffic parameters")]
    Traffic,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("warmup {warmup} s must be shorter than duration {duration} s")]
    Window { warmup: u64, duration: u64 },
    #[error("interference accumulation window is empty")]
    EmptyWindow,
    #[error("all eNBs must share the same PRB count")]
    MixedBandPlans,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("all samples share the same x value")]
    DegenerateX,
    #[error("sample {0} is not finite")]
    NonFinite(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HealError {
    #[error("most-coupled interference element is zero")]
    ZeroMaxCoupling,
    #[error("interference row is all zero")]
    ZeroRow,
    #[error("invalid healing configuration: {0}")]
    Config(String),
    #[error("iteration {iteration}: fitting {kpi} model of eNB {enb}: {source}")]
    Fit {
        iteration: usize,
        enb: usize,
        kpi: &'static str,
        #[source]
        source: FitError,
    },
    #[error("iteration {iteration}: measurement failed: {message}")]
    Measurement { iteration: usize, message: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: std::path::PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{context}: {source}")]
    Sim {
        context: &'static str,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Heal(#[from] HealError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("no alpha has both KPIs within the tolerance band of their minima")]
    EmptyFeasible,
    #[error("sweep produced no usable rows")]
    EmptySweep,
    #[error("eNB {0} has no complete first tier")]
    IncompleteTier(usize),
}

impl HarnessError {
    /// Stable machine-readable category, used by the CLI's error line.
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Config(_) | HarnessError::Scenario(_) => "config",
            HarnessError::Io { .. } | HarnessError::Csv { .. } => "io",
            HarnessError::Sim { .. } => "simulation",
            HarnessError::Heal(_) => "healing",
            HarnessError::Fit(_) => "fit",
            HarnessError::EmptyFeasible | HarnessError::EmptySweep => "sweep",
            HarnessError::IncompleteTier(_) => "selection",
        }
    }
}
