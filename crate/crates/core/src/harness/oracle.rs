//! Synthetic-oracle mode: analytic KPI curves plus Gaussian noise stand in
//! for the simulator, so the healing loop can be checked against a known
//! constrained optimum.
//!
//! The zone is eNB 0 (faulty) with neighbours `1..=coupling.len()`. Every
//! KPI of every eNB is a logistic curve of that eNB's own alpha; the
//! neighbours share one FTT curve and one BCR curve. Noise is drawn per
//! measurement with standard deviation `noise_frac * (hi - lo)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::healer::{
    optimize_alpha_s, slah_run, weights, AlphaProblem, CouplingRow, GridChoice, HealingConfig, HealingState,
    KpiSource, Measurement, ZoneModels,
};
use crate::simulator::InterferenceMatrix;
use crate::statlearn::{f_log, KpiModel};

use super::config::SlahSection;
use super::seeds::{derive_seed, tags};

/// `lo + (hi - lo) f(beta0 + beta1 x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticCurve {
    pub lo: f64,
    pub hi: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl LogisticCurve {
    pub const fn new(lo: f64, hi: f64, beta0: f64, beta1: f64) -> Self {
        Self { lo, hi, beta0, beta1 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.lo + (self.hi - self.lo) * f_log(self.beta0 + self.beta1 * x)
    }

    pub fn model(&self) -> KpiModel {
        KpiModel {
            beta0: self.beta0,
            beta1: self.beta1,
            y_lo: self.lo,
            y_hi: self.hi,
            n_samples: 0,
            residual_rms: 0.0,
        }
    }

    fn span(&self) -> f64 {
        (self.hi - self.lo).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Noise standard deviation as a fraction of each curve's range.
    pub noise_frac: f64,
    /// Interference coupling of the faulty cell to each neighbour.
    pub coupling: Vec<f64>,
    /// Generalized-interference exponent used in oracle runs. The analytic
    /// optimum is computed with the raw coupling, so the default is 0.
    pub gamma: f64,
    pub faulty_ftt: LogisticCurve,
    pub faulty_bcr: LogisticCurve,
    pub neighbour_ftt: LogisticCurve,
    pub neighbour_bcr: LogisticCurve,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            noise_frac: 0.05,
            coupling: vec![0.35, 1.0, 0.6, 0.2, 0.8, 0.45],
            gamma: 0.0,
            faulty_ftt: LogisticCurve::new(8.0, 16.0, -5.5, 9.0),
            faulty_bcr: LogisticCurve::new(1.0, 9.0, -3.5, 4.0),
            neighbour_ftt: LogisticCurve::new(6.0, 14.0, 3.6, -11.0),
            neighbour_bcr: LogisticCurve::new(0.5, 10.5, 2.5, -9.0),
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.coupling.is_empty() || self.coupling.iter().any(|&v| !(v >= 0.0)) {
            return Err(HarnessError::Config("oracle.coupling must be non-empty and non-negative".into()));
        }
        if !(self.noise_frac >= 0.0) {
            return Err(HarnessError::Config("oracle.noise_frac must be non-negative".into()));
        }
        Ok(())
    }

    pub fn neighbours(&self) -> Vec<usize> {
        (1..=self.coupling.len()).collect()
    }

    /// Interference matrix whose faulty-cell row is `coupling`.
    pub fn matrix(&self) -> InterferenceMatrix {
        let n = self.coupling.len() + 1;
        let mut rows = vec![vec![0.0; n]; n];
        rows[0][1..].copy_from_slice(&self.coupling);
        InterferenceMatrix::from_rows(rows)
    }

    pub fn true_models(&self) -> ZoneModels {
        let k = self.coupling.len();
        ZoneModels {
            ftt: std::iter::once(self.faulty_ftt.model()).chain(std::iter::repeat_n(self.neighbour_ftt.model(), k)).collect(),
            bcr: std::iter::once(self.faulty_bcr.model()).chain(std::iter::repeat_n(self.neighbour_bcr.model(), k)).collect(),
        }
    }

    /// Grid optimum of the true cost under the true constraints.
    pub fn true_optimum(&self, grid_step: f64, bcr_threshold: f64) -> Result<GridChoice, HarnessError> {
        let row = CouplingRow::new(self.neighbours(), self.coupling.clone());
        let s = crate::healer::most_coupled(&row)?;
        let w = weights(&row)?;
        let models = self.true_models();
        let problem = AlphaProblem { models: &models, coupling: &row, weights: &w, s, bcr_threshold };
        Ok(optimize_alpha_s(&problem, grid_step, 0.5)?)
    }
}

/// Noisy analytic KPI source.
pub struct SyntheticZone {
    config: OracleConfig,
    root_seed: u64,
}

impl SyntheticZone {
    pub fn new(config: OracleConfig, root_seed: u64) -> Self {
        Self { config, root_seed }
    }
}

impl KpiSource for SyntheticZone {
    fn measure(
        &mut self,
        k: usize,
        alpha_s: f64,
        neighbours: &[(usize, f64)],
    ) -> Result<Vec<Measurement>, Box<dyn std::error::Error + Send + Sync>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.root_seed, k as u64, tags::ORACLE));
        let std_normal = Normal::new(0.0, 1.0)?;
        let c = &self.config;
        let mut noisy = |curve: &LogisticCurve, x: f64| curve.eval(x) + c.noise_frac * curve.span() * std_normal.sample(&mut rng);
        let mut out = vec![Measurement {
            enb: 0,
            alpha: alpha_s,
            ftt: Some(noisy(&c.faulty_ftt, alpha_s)),
            bcr: Some(noisy(&c.faulty_bcr, alpha_s)),
        }];
        for &(enb, a) in neighbours {
            out.push(Measurement {
                enb,
                alpha: a,
                ftt: Some(noisy(&c.neighbour_ftt, a)),
                bcr: Some(noisy(&c.neighbour_bcr, a)),
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub state: HealingState,
    pub healing: HealingConfig,
    pub optimum: GridChoice,
}

impl OracleRun {
    pub fn error(&self) -> f64 {
        (self.state.current_alpha_s - self.optimum.alpha_s).abs()
    }
}

/// Runs the healing loop against the synthetic zone.
pub fn run_oracle(oracle: &OracleConfig, slah: &SlahSection, root_seed: u64) -> Result<OracleRun, HarnessError> {
    oracle.validate()?;
    let mut healing = slah.healing_config(0, oracle.neighbours());
    healing.gamma = oracle.gamma;
    let optimum = oracle.true_optimum(healing.alpha_grid_step, healing.bcr_threshold)?;
    let mut source = SyntheticZone::new(oracle.clone(), root_seed);
    let state = slah_run(&mut source, &healing, &oracle.matrix())?;
    Ok(OracleRun { state, healing, optimum })
}
