//! End-to-end healing against the simulator and the zone report.

use serde::Serialize;

use crate::error::HarnessError;
use crate::healer::{slah_run, HealingConfig, HealingState, KpiSource, Measurement};
use crate::simulator::{EpisodeWindow, InterferenceMatrix, KpiReport, Simulator};

use super::config::ExperimentConfig;
use super::seeds::{derive_seed, tags};
use super::sweep::{pick_reference, run_sweep, select_faulty, sweep_grid, SweepTable};

/// Measures the healing zone by running one simulator episode per request.
/// eNBs outside the zone keep their base alpha.
pub struct SimulatorSource<'a> {
    sim: &'a Simulator,
    base: Vec<f64>,
    zone: Vec<usize>,
    window: EpisodeWindow,
    root_seed: u64,
    common_seeds: bool,
    /// Full alpha vector of every episode run so far.
    pub applied: Vec<Vec<f64>>,
}

impl<'a> SimulatorSource<'a> {
    pub fn new(sim: &'a Simulator, base: Vec<f64>, zone: Vec<usize>, window: EpisodeWindow, root_seed: u64) -> Self {
        Self { sim, base, zone, window, root_seed, common_seeds: false, applied: Vec::new() }
    }

    pub fn with_common_seeds(mut self, common: bool) -> Self {
        self.common_seeds = common;
        self
    }

    pub fn seed_for(&self, k: usize) -> u64 {
        derive_seed(self.root_seed, if self.common_seeds { 0 } else { k as u64 }, tags::HEAL)
    }
}

impl KpiSource for SimulatorSource<'_> {
    fn measure(
        &mut self,
        k: usize,
        alpha_s: f64,
        neighbours: &[(usize, f64)],
    ) -> Result<Vec<Measurement>, Box<dyn std::error::Error + Send + Sync>> {
        let mut alphas = self.base.clone();
        alphas[self.zone[0]] = alpha_s;
        for &(j, a) in neighbours {
            alphas[j] = a;
        }
        let out = self.sim.run_episode(&alphas, self.window, self.seed_for(k))?;
        let measured = self
            .zone
            .iter()
            .map(|&enb| {
                let kpi = &out.report.enbs[enb];
                Measurement { enb, alpha: alphas[enb], ftt: kpi.ftt, bcr: kpi.bcr }
            })
            .collect();
        self.applied.push(alphas);
        Ok(measured)
    }
}

/// `100 (reference - optimized) / reference`; absent for a zero or missing
/// reference.
pub fn improvement_pct(reference: Option<f64>, optimized: Option<f64>) -> Option<f64> {
    match (reference, optimized) {
        (Some(r), Some(o)) if r != 0.0 => Some(100.0 * (r - o) / r),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Faulty,
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneEnb {
    pub enb: usize,
    pub tier: Tier,
    pub reference_alpha: f64,
    pub optimized_alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_bcr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimized_bcr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bcr_improvement_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_ftt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimized_ftt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ftt_improvement_pct: Option<f64>,
}

/// Mean KPIs over a set of eNBs, reference against optimized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneSummary {
    pub enbs: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_bcr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimized_bcr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bcr_improvement_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_ftt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimized_ftt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ftt_improvement_pct: Option<f64>,
}

fn mean(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = v.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

impl ZoneSummary {
    fn over(enbs: &[ZoneEnb], members: &[usize]) -> Self {
        let rows: Vec<&ZoneEnb> = enbs.iter().filter(|e| members.contains(&e.enb)).collect();
        let reference_bcr = mean(rows.iter().map(|e| e.reference_bcr));
        let optimized_bcr = mean(rows.iter().map(|e| e.optimized_bcr));
        let reference_ftt = mean(rows.iter().map(|e| e.reference_ftt));
        let optimized_ftt = mean(rows.iter().map(|e| e.optimized_ftt));
        Self {
            enbs: members.to_vec(),
            reference_bcr,
            optimized_bcr,
            bcr_improvement_pct: improvement_pct(reference_bcr, optimized_bcr),
            reference_ftt,
            optimized_ftt,
            ftt_improvement_pct: improvement_pct(reference_ftt, optimized_ftt),
        }
    }
}

/// Reference against optimized KPIs around the healed cell. The
/// optimization zone is the faulty cell and its first tier; the evaluation
/// zone adds the second tier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneReport {
    pub faulty: usize,
    pub most_coupled: usize,
    pub ns1: Vec<usize>,
    pub ns2: Vec<usize>,
    pub reference_alpha: f64,
    pub optimized_alpha_s: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Measured `FTT_c + sum_j w_j FTT_j` at the reference and optimized settings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimized_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_improvement_pct: Option<f64>,
    pub optimization_zone: ZoneSummary,
    pub evaluation_zone: ZoneSummary,
    pub enbs: Vec<ZoneEnb>,
}

/// Measured cost from a KPI report: faulty-cell FTT plus the weighted
/// neighbour FTTs. Absent when any of them is missing.
pub fn measured_cost(report: &KpiReport, c: usize, ns1: &[usize], weights: &[f64]) -> Option<f64> {
    let mut total = report.enbs[c].ftt?;
    for (&j, &w) in ns1.iter().zip(weights) {
        total += w * report.enbs[j].ftt?;
    }
    Some(total)
}

impl ZoneReport {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        healing: &HealingConfig,
        state: &HealingState,
        ns2: &[usize],
        reference_alphas: &[f64],
        optimized_alphas: &[f64],
        reference: &KpiReport,
        optimized: &KpiReport,
    ) -> Self {
        let c = healing.c;
        let tiers = std::iter::once((c, Tier::Faulty))
            .chain(healing.ns1.iter().map(|&j| (j, Tier::First)))
            .chain(ns2.iter().map(|&j| (j, Tier::Second)));
        let enbs: Vec<ZoneEnb> = tiers
            .map(|(enb, tier)| {
                let (r, o) = (&reference.enbs[enb], &optimized.enbs[enb]);
                ZoneEnb {
                    enb,
                    tier,
                    reference_alpha: reference_alphas[enb],
                    optimized_alpha: optimized_alphas[enb],
                    reference_bcr: r.bcr,
                    optimized_bcr: o.bcr,
                    bcr_improvement_pct: improvement_pct(r.bcr, o.bcr),
                    reference_ftt: r.ftt,
                    optimized_ftt: o.ftt,
                    ftt_improvement_pct: improvement_pct(r.ftt, o.ftt),
                }
            })
            .collect();
        let optimization: Vec<usize> = healing.zone();
        let evaluation: Vec<usize> = optimization.iter().chain(ns2).copied().collect();
        let reference_cost = measured_cost(reference, c, &healing.ns1, &state.weights);
        let optimized_cost = measured_cost(optimized, c, &healing.ns1, &state.weights);
        Self {
            faulty: c,
            most_coupled: state.s,
            ns1: healing.ns1.clone(),
            ns2: ns2.to_vec(),
            reference_alpha: reference_alphas[c],
            optimized_alpha_s: optimized_alphas[c],
            iterations: state.iteration,
            converged: state.converged,
            reference_cost,
            optimized_cost,
            cost_improvement_pct: improvement_pct(reference_cost, optimized_cost),
            optimization_zone: ZoneSummary::over(&enbs, &optimization),
            evaluation_zone: ZoneSummary::over(&enbs, &evaluation),
            enbs,
        }
    }

    pub fn faulty_row(&self) -> &ZoneEnb {
        &self.enbs[0]
    }
}

/// Everything produced by one healing run.
#[derive(Debug, Clone)]
pub struct HealRun {
    pub sweep: Option<SweepTable>,
    pub reference_alpha: f64,
    pub matrix: InterferenceMatrix,
    pub healing: HealingConfig,
    pub state: HealingState,
    pub reference_alphas: Vec<f64>,
    pub optimized_alphas: Vec<f64>,
    pub reference: KpiReport,
    pub optimized: KpiReport,
    pub zone: ZoneReport,
}

/// Reference alpha from the config, or from a sweep when the config has none.
pub fn reference_alpha(config: &ExperimentConfig, sim: &Simulator) -> Result<(f64, Option<SweepTable>), HarnessError> {
    if let Some(a) = config.icic.reference_alpha {
        return Ok((a, None));
    }
    let s = &config.sweep;
    let table = run_sweep(sim, &sweep_grid(s.alpha_min, s.alpha_max, s.step), config.episode.window(), config.seed)?;
    Ok((pick_reference(&table, config.icic.tolerance)?, Some(table)))
}

/// Interference matrix estimated from one long episode at `alphas`.
pub fn estimate_matrix(config: &ExperimentConfig, sim: &Simulator, alphas: &[f64]) -> Result<InterferenceMatrix, HarnessError> {
    sim.run_episode(alphas, config.episode.matrix_window(), derive_seed(config.seed, 0, tags::MATRIX))
        .map(|o| o.matrix)
        .map_err(|source| HarnessError::Sim { context: "matrix episode", source })
}

/// KPIs of one evaluation episode. Reference and optimized settings share
/// the evaluation seed so that they see the same traffic.
pub fn evaluate(config: &ExperimentConfig, sim: &Simulator, alphas: &[f64]) -> Result<KpiReport, HarnessError> {
    sim.run_episode(alphas, config.episode.window(), derive_seed(config.seed, 0, tags::EVALUATE))
        .map(|o| o.report)
        .map_err(|source| HarnessError::Sim { context: "evaluation episode", source })
}

/// Sweep (if needed), matrix estimation, faulty-cell selection, the healing
/// loop and the reference-against-optimized evaluation.
pub fn heal(config: &ExperimentConfig) -> Result<HealRun, HarnessError> {
    config.validate()?;
    let sim = config.simulator()?;
    let layout = sim.layout();
    let n = layout.len();

    let (reference_alpha, sweep) = reference_alpha(config, &sim)?;
    let reference_alphas = vec![reference_alpha; n];
    let matrix = estimate_matrix(config, &sim, &reference_alphas)?;
    let reference = evaluate(config, &sim, &reference_alphas)?;

    let c = match config.slah.faulty {
        Some(c) if c >= n => return Err(HarnessError::Config(format!("slah.faulty = {c} but the grid has {n} eNBs"))),
        Some(c) => c,
        None => {
            let candidates: Vec<usize> = (0..n).filter(|&c| layout.has_full_first_tier(c)).collect();
            select_faulty(&reference, &candidates).ok_or(HarnessError::IncompleteTier(0))?
        }
    };
    let ns1 = layout.first_tier(c);
    let ns2 = layout.second_tier(c);
    let healing = config.slah.healing_config(c, ns1);

    let mut source = SimulatorSource::new(&sim, reference_alphas.clone(), healing.zone(), config.episode.window(), config.seed)
        .with_common_seeds(config.slah.common_seeds);
    let state = slah_run(&mut source, &healing, &matrix)?;
    let optimized_alphas = source.applied.last().cloned().unwrap_or_else(|| reference_alphas.clone());
    let optimized = evaluate(config, &sim, &optimized_alphas)?;

    let zone = ZoneReport::build(&healing, &state, &ns2, &reference_alphas, &optimized_alphas, &reference, &optimized);
    Ok(HealRun {
        sweep,
        reference_alpha,
        matrix,
        healing,
        state,
        reference_alphas,
        optimized_alphas,
        reference,
        optimized,
        zone,
    })
}
