//! Experiment configuration, read from a single TOML file.
//!
//! Every key is optional and falls back to the default shown below; unknown
//! keys are rejected with the key named in the error.
//!
//! ```toml
//! seed = 1                      # root seed for every derived episode seed
//! output_dir = "out"
//!
//! [scenario]
//! rings = 2                     # 1 + 3 rings (rings + 1) eNBs
//! inter_site_distance = 500.0   # meters
//!
//! [propagation]                 # pathloss_intercept, pathloss_exponent_coeff,
//!                               # shadowing_stddev, noise_dbm_per_prb
//! [link]                        # min_sinr_db, levels, shannon_attenuation, max_efficiency
//! [traffic]                     # arrival_rate, file_size_kbit, min/max_prbs_per_user
//!
//! [icic]
//! max_power_dbm = 30.0          # per-PRB transmit power P
//! total_prbs = 24
//! prbs_per_subband = 8
//! reference_alpha = 0.5         # omit to pick it from a sweep
//! tolerance = 0.02              # band around the sweep minima
//!
//! [episode]
//! duration = 2500               # seconds, warmup included
//! warmup = 500
//! matrix_duration = 7000        # interference-matrix estimation episode
//!
//! [sweep]
//! alpha_min = 0.0125
//! alpha_max = 1.0
//! step = 0.0125
//!
//! [slah]
//! faulty = 0                    # omit to select the worst eNB
//! bcr_threshold = 5.0
//! gamma = 0.3
//! init_alphas = [0.95, 0.73, 0.5, 0.28, 0.05]
//! alpha_grid_step = 0.0125
//! convergence_tol = 0.01
//! max_iterations = 10
//! common_seeds = false          # reuse one episode seed for every iteration
//! [slah.fit]                    # margin, refine_bounds, max_span_ratio, ...
//!
//! [oracle]                      # synthetic KPI ground truth, see OracleConfig
//! ```

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::healer::HealingConfig;
use crate::scenario::{build_hex_grid, EnbConfig, NetworkLayout, PropagationParams, TrafficParams};
use crate::simulator::{EpisodeWindow, LinkParams, LinkTable, Simulator};
use crate::statlearn::FitOptions;

use super::oracle::OracleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: String,
    pub scenario: ScenarioSection,
    pub propagation: PropagationParams,
    pub link: LinkParams,
    pub traffic: TrafficParams,
    pub icic: IcicSection,
    pub episode: EpisodeSection,
    pub sweep: SweepSection,
    pub slah: SlahSection,
    pub oracle: OracleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: "out".into(),
            scenario: ScenarioSection::default(),
            propagation: PropagationParams::default(),
            link: LinkParams::default(),
            traffic: TrafficParams { arrival_rate: 0.75, ..TrafficParams::default() },
            icic: IcicSection::default(),
            episode: EpisodeSection::default(),
            sweep: SweepSection::default(),
            slah: SlahSection::default(),
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub rings: usize,
    pub inter_site_distance: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { rings: 2, inter_site_distance: 500.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcicSection {
    pub max_power_dbm: f64,
    pub total_prbs: usize,
    pub prbs_per_subband: usize,
    /// Network-wide default alpha. Picked from a sweep when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_alpha: Option<f64>,
    /// Relative band around each KPI minimum used to pick the reference.
    pub tolerance: f64,
}

impl Default for IcicSection {
    fn default() -> Self {
        Self { max_power_dbm: 30.0, total_prbs: 24, prbs_per_subband: 8, reference_alpha: None, tolerance: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub duration: u64,
    pub warmup: u64,
    pub matrix_duration: u64,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self { duration: 2500, warmup: 500, matrix_duration: 7000 }
    }
}

impl EpisodeSection {
    pub fn window(&self) -> EpisodeWindow {
        EpisodeWindow { duration: self.duration, warmup: self.warmup }
    }

    pub fn matrix_window(&self) -> EpisodeWindow {
        EpisodeWindow { duration: self.matrix_duration, warmup: self.warmup }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub step: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { alpha_min: 0.0125, alpha_max: 1.0, step: 0.0125 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlahSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faulty: Option<usize>,
    pub bcr_threshold: f64,
    pub gamma: f64,
    pub init_alphas: Vec<f64>,
    pub alpha_grid_step: f64,
    pub convergence_tol: f64,
    pub max_iterations: usize,
    /// Reuse the same episode seed in every iteration instead of deriving
    /// one per iteration.
    pub common_seeds: bool,
    pub fit: FitOptions,
}

impl Default for SlahSection {
    fn default() -> Self {
        let h = HealingConfig::new(0, Vec::new());
        Self {
            faulty: None,
            bcr_threshold: h.bcr_threshold,
            gamma: h.gamma,
            init_alphas: h.init_alphas,
            alpha_grid_step: h.alpha_grid_step,
            convergence_tol: h.convergence_tol,
            max_iterations: h.max_iterations,
            common_seeds: false,
            fit: h.fit,
        }
    }
}

impl SlahSection {
    pub fn healing_config(&self, c: usize, ns1: Vec<usize>) -> HealingConfig {
        HealingConfig {
            c,
            ns1,
            bcr_threshold: self.bcr_threshold,
            gamma: self.gamma,
            init_alphas: self.init_alphas.clone(),
            alpha_grid_step: self.alpha_grid_step,
            convergence_tol: self.convergence_tol,
            max_iterations: self.max_iterations,
            fit: self.fit.clone(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        let s = &self.sweep;
        if !(s.step > 0.0) || !(s.alpha_min > 0.0) || !(s.alpha_max <= 1.0) || s.alpha_min > s.alpha_max {
            return bad("sweep needs 0 < alpha_min <= alpha_max <= 1 and step > 0");
        }
        if let Some(a) = self.icic.reference_alpha {
            if !(a > 0.0 && a <= 1.0) {
                return bad("icic.reference_alpha must lie in (0, 1]");
            }
        }
        if !(self.icic.tolerance >= 0.0) {
            return bad("icic.tolerance must be non-negative");
        }
        if self.episode.warmup >= self.episode.duration || self.episode.warmup >= self.episode.matrix_duration {
            return bad("episode.warmup must be shorter than duration and matrix_duration");
        }
        self.traffic.validate()?;
        self.propagation.validate()?;
        self.oracle.validate()?;
        Ok(())
    }

    pub fn enb_template(&self) -> EnbConfig {
        EnbConfig {
            max_power_dbm: self.icic.max_power_dbm,
            total_prbs: self.icic.total_prbs,
            prbs_per_subband: self.icic.prbs_per_subband,
            ..EnbConfig::default()
        }
    }

    pub fn layout(&self) -> Result<NetworkLayout, HarnessError> {
        Ok(build_hex_grid(self.scenario.rings, self.scenario.inter_site_distance, &self.enb_template())?)
    }

    pub fn simulator(&self) -> Result<Simulator, HarnessError> {
        Simulator::new(self.layout()?, self.propagation.clone(), self.traffic.clone(), LinkTable::new(&self.link))
            .map_err(|source| HarnessError::Sim { context: "building simulator", source })
    }

    pub fn fit_options(&self) -> &FitOptions {
        &self.slah.fit
    }
}
