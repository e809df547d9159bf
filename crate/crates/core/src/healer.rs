//! The healing loop.
//!
//! Only one scalar is optimized: the centre-band power factor `alpha_s` of
//! the neighbour most coupled to the faulty cell `c`. Every other first-tier
//! neighbour follows through the coupling map [`propagate_alpha`], the
//! faulty cell keeps its own alpha. Each iteration refits logistic KPI
//! models on every data point gathered so far, minimizes the weighted FTT
//! cost over a grid subject to predicted BCR limits, applies the proposal
//! and measures again.

use serde::{Deserialize, Serialize};

use crate::error::{FitError, HealError};
use crate::simulator::InterferenceMatrix;
use crate::statlearn::{fit_with, FitOptions, KpiModel, Sample};

/// Interference received by the faulty cell from each first-tier neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRow {
    pub ids: Vec<usize>,
    pub values: Vec<f64>,
}

impl CouplingRow {
    pub fn new(ids: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(ids.len(), values.len());
        Self { ids, values }
    }

    pub fn from_matrix(matrix: &InterferenceMatrix, c: usize, ns1: &[usize]) -> Self {
        Self::new(ns1.to_vec(), matrix.row(c, ns1))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn value_of(&self, id: usize) -> Option<f64> {
        self.ids.iter().position(|&j| j == id).map(|k| self.values[k])
    }
}

/// The neighbour with the largest interference element; ties go to the
/// smallest eNB id.
pub fn most_coupled(row: &CouplingRow) -> Result<usize, HealError> {
    row.ids
        .iter()
        .zip(&row.values)
        .fold(None, |best: Option<(usize, f64)>, (&id, &v)| match best {
            Some((bid, bv)) if bv > v || (bv == v && bid < id) => Some((bid, bv)),
            _ => Some((id, v)),
        })
        .map(|(id, _)| id)
        .ok_or_else(|| HealError::Config("empty first-tier neighbour set".into()))
}

/// Coupling map from `alpha_s` to every neighbour's alpha:
/// `alpha_j = alpha_s + (1 - alpha_s)(1 - I_cj / I_cs)`, held in
/// `[alpha_s, 1]`. Output is aligned with `row.ids`.
pub fn propagate_alpha(alpha_s: f64, row: &CouplingRow, s: usize) -> Result<Vec<f64>, HealError> {
    if !(alpha_s > 0.0 && alpha_s <= 1.0) {
        return Err(HealError::Config(format!("alpha_s {alpha_s} outside (0, 1]")));
    }
    let i_s = row
        .value_of(s)
        .ok_or_else(|| HealError::Config(format!("eNB {s} is not a first-tier neighbour")))?;
    if !(i_s > 0.0) {
        return Err(HealError::ZeroMaxCoupling);
    }
    Ok(row
        .ids
        .iter()
        .zip(&row.values)
        .map(|(&j, &v)| {
            if j == s {
                alpha_s
            } else {
                (alpha_s + (1.0 - alpha_s) * (1.0 - v / i_s)).clamp(alpha_s, 1.0)
            }
        })
        .collect())
}

/// `I'_cj = I_cj exp(-gamma B_j)` with `B_j` the BCR normalized by the
/// largest neighbour BCR. Unchanged when every BCR is zero.
pub fn generalized_interference(row: &CouplingRow, bcr: &[f64], gamma: f64) -> CouplingRow {
    let max = bcr.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return row.clone();
    }
    let values = row.values.iter().zip(bcr).map(|(v, b)| v * (-gamma * (b / max)).exp()).collect();
    CouplingRow::new(row.ids.clone(), values)
}

/// Cost weights `I_cj / sum_l I_cl`.
pub fn weights(row: &CouplingRow) -> Result<Vec<f64>, HealError> {
    let total: f64 = row.values.iter().sum();
    if !(total > 0.0) {
        return Err(HealError::ZeroRow);
    }
    Ok(row.values.iter().map(|v| v / total).collect())
}

/// Fitted models of the optimization zone. Index 0 is the faulty cell,
/// index `1 + k` is `ns1[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneModels {
    pub ftt: Vec<KpiModel>,
    pub bcr: Vec<KpiModel>,
}

/// The scalar problem solved at each optimization iteration.
#[derive(Debug, Clone)]
pub struct AlphaProblem<'a> {
    pub models: &'a ZoneModels,
    /// Coupling used by the alpha map (the generalized row).
    pub coupling: &'a CouplingRow,
    pub weights: &'a [f64],
    pub s: usize,
    pub bcr_threshold: f64,
}

impl AlphaProblem<'_> {
    /// Explanatory variable of each zone model at `alpha_s`: the faulty cell's
    /// models take `alpha_s` itself, neighbours take their mapped alpha.
    pub fn model_inputs(&self, alpha_s: f64) -> Result<Vec<f64>, HealError> {
        let mut xs = vec![alpha_s];
        xs.extend(propagate_alpha(alpha_s, self.coupling, self.s)?);
        Ok(xs)
    }

    pub fn cost(&self, alpha_s: f64) -> Result<f64, HealError> {
        let xs = self.model_inputs(alpha_s)?;
        Ok(cost_from_inputs(&self.models.ftt, self.weights, &xs))
    }

    /// Largest `predicted BCR - threshold` over the zone; feasible iff < 0.
    pub fn max_violation(&self, alpha_s: f64) -> Result<f64, HealError> {
        let xs = self.model_inputs(alpha_s)?;
        Ok(self
            .models
            .bcr
            .iter()
            .zip(&xs)
            .map(|(m, &x)| m.predict(x) - self.bcr_threshold)
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

fn cost_from_inputs(ftt: &[KpiModel], weights: &[f64], xs: &[f64]) -> f64 {
    let neighbours: f64 = ftt[1..].iter().zip(weights).zip(&xs[1..]).map(|((m, w), &x)| w * m.predict(x)).sum();
    ftt[0].predict(xs[0]) + neighbours
}

/// `C(alpha_s) = FTT_c(alpha_s) + sum_j w_j FTT_j(alpha_j(alpha_s))`.
/// `ftt[0]` is the faulty cell's model, `ftt[1..]` follow `coupling.ids`.
pub fn cost(
    ftt: &[KpiModel],
    weights: &[f64],
    coupling: &CouplingRow,
    s: usize,
    alpha_s: f64,
) -> Result<f64, HealError> {
    let mut xs = vec![alpha_s];
    xs.extend(propagate_alpha(alpha_s, coupling, s)?);
    Ok(cost_from_inputs(ftt, weights, &xs))
}

/// Candidate values `k / n`, `k = 1..=n`, with `n = 1 / step`.
pub fn alpha_grid(step: f64) -> Result<Vec<f64>, HealError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(HealError::Config(format!("grid step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(HealError::Config(format!("grid step {step} does not divide 1")));
    }
    let n = n as usize;
    Ok((1..=n).map(|k| k as f64 / n as f64).collect())
}

/// Outcome of one grid optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridChoice {
    pub alpha_s: f64,
    pub cost: f64,
    pub feasible: bool,
    pub max_violation: f64,
}

/// Grid minimization of the cost subject to every predicted BCR staying
/// below the threshold. Without any feasible point, the point with the
/// smallest worst-case violation is returned instead. Equal scores go to
/// the point nearest `current`, then to the smaller alpha.
pub fn optimize_alpha_s(problem: &AlphaProblem<'_>, grid_step: f64, current: f64) -> Result<GridChoice, HealError> {
    let grid = alpha_grid(grid_step)?;
    let mut points = Vec::with_capacity(grid.len());
    for &a in &grid {
        let violation = problem.max_violation(a)?;
        points.push(GridChoice { alpha_s: a, cost: problem.cost(a)?, feasible: violation < 0.0, max_violation: violation });
    }
    let any_feasible = points.iter().any(|p| p.feasible);
    let score = |p: &GridChoice| if any_feasible { p.cost } else { p.max_violation };

    let mut best: Option<GridChoice> = None;
    for p in points.into_iter().filter(|p| p.feasible || !any_feasible) {
        best = match best {
            None => Some(p),
            Some(b) => {
                let (sp, sb) = (score(&p), score(&b));
                let closer = (p.alpha_s - current).abs() < (b.alpha_s - current).abs();
                if sp < sb || (sp == sb && closer) {
                    Some(p)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.ok_or_else(|| HealError::Config("empty alpha grid".into()))
}

/// Stop rule of the optimization phase: the loop halts once `required`
/// optimization steps have moved `alpha_s` by no more than `tol`. Steps are
/// counted over the whole phase, not only back to back.
#[derive(Debug, Clone)]
pub struct ConvergenceMonitor {
    tol: f64,
    required: usize,
    small_steps: usize,
    last: Option<f64>,
}

impl ConvergenceMonitor {
    /// Slack for decimal tolerances such as `|0.46 - 0.47| <= 0.01`.
    const SLACK: f64 = 1e-9;

    pub fn new(tol: f64) -> Self {
        Self { tol, required: 2, small_steps: 0, last: None }
    }

    /// Records the next optimization output; returns true when the loop should stop.
    pub fn observe(&mut self, alpha_s: f64) -> bool {
        if let Some(prev) = self.last {
            if (alpha_s - prev).abs() <= self.tol + Self::SLACK {
                self.small_steps += 1;
            }
        }
        self.last = Some(alpha_s);
        self.small_steps >= self.required
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealingConfig {
    /// Faulty eNB.
    pub c: usize,
    /// First-tier neighbours of `c`.
    pub ns1: Vec<usize>,
    pub bcr_threshold: f64,
    pub gamma: f64,
    pub init_alphas: Vec<f64>,
    pub alpha_grid_step: f64,
    pub convergence_tol: f64,
    /// Maximum number of optimization iterations.
    pub max_iterations: usize,
    #[serde(default)]
    pub fit: FitOptions,
}

impl HealingConfig {
    pub fn new(c: usize, ns1: Vec<usize>) -> Self {
        Self {
            c,
            ns1,
            bcr_threshold: 5.0,
            gamma: 0.3,
            init_alphas: vec![0.95, 0.73, 0.50, 0.28, 0.05],
            alpha_grid_step: 0.0125,
            convergence_tol: 0.01,
            max_iterations: 10,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HealError> {
        let bad = |m: String| Err(HealError::Config(m));
        if self.ns1.is_empty() {
            return bad("first-tier neighbour set is empty".into());
        }
        if self.ns1.contains(&self.c) {
            return bad(format!("faulty eNB {} listed as its own neighbour", self.c));
        }
        let mut sorted = self.ns1.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.ns1.len() {
            return bad("duplicate first-tier neighbour".into());
        }
        if self.init_alphas.len() < 3 {
            return bad("need at least three initial alpha values".into());
        }
        if self.init_alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return bad("initial alpha outside (0, 1]".into());
        }
        for (i, a) in self.init_alphas.iter().enumerate() {
            if self.init_alphas[..i].contains(a) {
                return bad(format!("initial alpha {a} repeated"));
            }
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("negative convergence tolerance".into());
        }
        alpha_grid(self.alpha_grid_step)?;
        Ok(())
    }

    /// Zone members in model order: `c` then `ns1`.
    pub fn zone(&self) -> Vec<usize> {
        std::iter::once(self.c).chain(self.ns1.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initialization,
    Optimization,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Initialization => "initialization",
            Phase::Optimization => "optimization",
        }
    }
}

/// KPIs of one eNB under one alpha setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub alpha: f64,
    pub ftt: Option<f64>,
    pub bcr: Option<f64>,
}

/// One measured KPI pair returned by a [`KpiSource`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub enb: usize,
    /// Alpha in force at this eNB during the measurement.
    pub alpha: f64,
    pub ftt: Option<f64>,
    pub bcr: Option<f64>,
}

/// Data points of every zone eNB, in zone order, one per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPointSet {
    pub enbs: Vec<usize>,
    pub points: Vec<Vec<DataPoint>>,
}

impl DataPointSet {
    pub fn new(enbs: Vec<usize>) -> Self {
        let points = vec![Vec::new(); enbs.len()];
        Self { enbs, points }
    }

    pub fn len(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples of one KPI for the eNB at zone index `z`. The faulty cell's
    /// explanatory variable is `alpha_s`, a neighbour's is its own alpha.
    fn samples(&self, z: usize, alpha_s: &[f64], kpi: fn(&DataPoint) -> Option<f64>) -> Vec<Sample> {
        self.points[z]
            .iter()
            .zip(alpha_s)
            .filter_map(|(p, &a)| kpi(p).map(|y| Sample::new(if z == 0 { a } else { p.alpha }, y)))
            .collect()
    }
}

/// Per-iteration record of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    /// 1-based iteration index, equal to the data-point count after it.
    pub k: usize,
    pub phase: Phase,
    pub alpha_s: f64,
    /// Alpha applied to each zone eNB, zone order.
    pub alphas: Vec<f64>,
    /// Model-predicted cost at the proposal (optimization iterations only).
    pub predicted_cost: Option<f64>,
    pub feasible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HealingState {
    pub data: DataPointSet,
    pub s: usize,
    pub weights: Vec<f64>,
    pub current_alpha_s: f64,
    pub iteration: usize,
    pub phase: Phase,
    pub converged: bool,
    /// Models fitted on the final data set.
    pub models: Option<ZoneModels>,
    pub history: Vec<IterationSummary>,
}

impl HealingState {
    /// `alpha_s` applied at each iteration so far.
    pub fn alpha_s_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.alpha_s).collect()
    }
}

/// Network or stand-in that turns an alpha assignment into KPIs.
pub trait KpiSource {
    /// Applies the first-tier alphas `neighbours` (eNB id, alpha) produced
    /// from `alpha_s` at iteration `k`, and reports KPIs for the faulty cell
    /// and every listed neighbour.
    fn measure(
        &mut self,
        k: usize,
        alpha_s: f64,
        neighbours: &[(usize, f64)],
    ) -> Result<Vec<Measurement>, Box<dyn std::error::Error + Send + Sync>>;
}

/// Fits FTT and BCR models for every zone eNB.
pub fn fit_zone(data: &DataPointSet, alpha_s: &[f64], opts: &FitOptions, k: usize) -> Result<ZoneModels, HealError> {
    let mut ftt = Vec::with_capacity(data.enbs.len());
    let mut bcr = Vec::with_capacity(data.enbs.len());
    for (z, &enb) in data.enbs.iter().enumerate() {
        let fit_one = |kpi: &'static str, get: fn(&DataPoint) -> Option<f64>| {
            let samples = data.samples(z, alpha_s, get);
            match fit_with(&samples, opts) {
                // A neighbour whose alpha never moved (zero coupling) is only
                // ever evaluated at that alpha.
                Err(FitError::DegenerateX) => {
                    let mean = samples.iter().map(|s| s.y).sum::<f64>() / samples.len() as f64;
                    Ok(KpiModel { n_samples: samples.len(), ..KpiModel::flat(mean) })
                }
                other => other.map_err(|source| HealError::Fit { iteration: k, enb, kpi, source }),
            }
        };
        ftt.push(fit_one("FTT", |p| p.ftt)?);
        bcr.push(fit_one("BCR", |p| p.bcr)?);
    }
    Ok(ZoneModels { ftt, bcr })
}

/// Runs the healing loop against `source` with the interference matrix
/// estimated at the reference setting.
pub fn slah_run(
    source: &mut dyn KpiSource,
    config: &HealingConfig,
    matrix: &InterferenceMatrix,
) -> Result<HealingState, HealError> {
    config.validate()?;
    let row = CouplingRow::from_matrix(matrix, config.c, &config.ns1);
    let s = most_coupled(&row)?;
    let w = weights(&row)?;
    let zone = config.zone();

    let mut state = HealingState {
        data: DataPointSet::new(zone.clone()),
        s,
        weights: w.clone(),
        current_alpha_s: config.init_alphas[0],
        iteration: 0,
        phase: Phase::Initialization,
        converged: false,
        models: None,
        history: Vec::new(),
    };

    let mut apply = |state: &mut HealingState,
                     alpha_s: f64,
                     coupling: &CouplingRow,
                     phase: Phase,
                     choice: Option<GridChoice>|
     -> Result<(), HealError> {
        let k = state.iteration + 1;
        let neighbour_alphas = propagate_alpha(alpha_s, coupling, s)?;
        let assignment: Vec<(usize, f64)> = config.ns1.iter().copied().zip(neighbour_alphas.iter().copied()).collect();
        let measured = source
            .measure(k, alpha_s, &assignment)
            .map_err(|e| HealError::Measurement { iteration: k, message: e.to_string() })?;
        for (z, &enb) in zone.iter().enumerate() {
            let m = measured.iter().find(|m| m.enb == enb).ok_or_else(|| HealError::Measurement {
                iteration: k,
                message: format!("no KPIs reported for eNB {enb}"),
            })?;
            state.data.points[z].push(DataPoint { alpha: m.alpha, ftt: m.ftt, bcr: m.bcr });
        }
        let mut alphas = vec![alpha_s];
        alphas.extend(neighbour_alphas);
        state.history.push(IterationSummary {
            k,
            phase,
            alpha_s,
            alphas,
            predicted_cost: choice.map(|c| c.cost),
            feasible: choice.map(|c| c.feasible),
        });
        state.iteration = k;
        state.current_alpha_s = alpha_s;
        Ok(())
    };

    for &a in &config.init_alphas {
        apply(&mut state, a, &row, Phase::Initialization, None)?;
    }

    state.phase = Phase::Optimization;
    let mut monitor = ConvergenceMonitor::new(config.convergence_tol);
    for _ in 0..config.max_iterations {
        let history = state.alpha_s_history();
        let models = fit_zone(&state.data, &history, &config.fit, state.iteration)?;
        let latest_bcr: Vec<f64> =
            state.data.points[1..].iter().map(|p| p.last().and_then(|d| d.bcr).unwrap_or(0.0)).collect();
        let generalized = generalized_interference(&row, &latest_bcr, config.gamma);
        let problem = AlphaProblem {
            models: &models,
            coupling: &generalized,
            weights: &w,
            s,
            bcr_threshold: config.bcr_threshold,
        };
        let choice = optimize_alpha_s(&problem, config.alpha_grid_step, state.current_alpha_s)?;
        apply(&mut state, choice.alpha_s, &generalized, Phase::Optimization, Some(choice))?;
        if monitor.observe(choice.alpha_s) {
            state.converged = true;
            break;
        }
    }

    let history = state.alpha_s_history();
    state.models = Some(fit_zone(&state.data, &history, &config.fit, state.iteration)?);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[(usize, f64)]) -> CouplingRow {
        CouplingRow::new(values.iter().map(|v| v.0).collect(), values.iter().map(|v| v.1).collect())
    }

    #[test]
    fn most_coupled_examples() {
        assert_eq!(most_coupled(&row(&[(14, 1.0), (45, 9.0), (22, 3.0)])).unwrap(), 45);
        assert_eq!(most_coupled(&row(&[(7, 2.0), (3, 2.0), (5, 2.0)])).unwrap(), 3);
        assert_eq!(most_coupled(&row(&[(22, 3.0), (45, 9.0), (14, 1.0)])).unwrap(), 45);
        assert!(most_coupled(&row(&[])).is_err());
    }

    #[test]
    fn propagate_examples() {
        let r = row(&[(1, 10.0), (2, 0.0), (3, 4.0)]);
        let a = propagate_alpha(0.5, &r, 1).unwrap();
        assert_eq!(a[0], 0.5);
        assert_eq!(a[1], 1.0);
        assert!((a[2] - 0.8).abs() < 1e-12);
        assert_eq!(propagate_alpha(0.5, &row(&[(1, 0.0)]), 1), Err(HealError::ZeroMaxCoupling));
        assert!(propagate_alpha(0.0, &r, 1).is_err());
        assert!(propagate_alpha(0.5, &r, 9).is_err());
    }

    #[test]
    fn generalized_interference_examples() {
        let r = row(&[(1, 2.0), (2, 5.0)]);
        assert_eq!(generalized_interference(&r, &[2.0, 4.0], 0.0), r);
        let g = generalized_interference(&r, &[2.0, 4.0], 0.3);
        assert!((g.values[0] - 2.0 * (-0.15f64).exp()).abs() < 1e-12);
        assert!((g.values[0] - 1.7214).abs() < 1e-4);
        assert_eq!(g.values[1], 5.0 * (-0.3f64).exp());
        assert_eq!(generalized_interference(&r, &[0.0, 0.0], 0.3), r);
    }

    #[test]
    fn weights_examples() {
        let w = weights(&row(&[(1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0), (5, 1.0), (6, 1.0)])).unwrap();
        assert!(w.iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
        assert_eq!(weights(&row(&[(1, 0.0), (2, 3.0)])).unwrap(), vec![0.0, 1.0]);
        assert_eq!(weights(&row(&[(1, 3.0), (2, 1.0)])).unwrap(), vec![0.75, 0.25]);
        assert_eq!(weights(&row(&[(1, 0.0), (2, 0.0)])), Err(HealError::ZeroRow));
    }

    fn logistic(lo: f64, hi: f64, b0: f64, b1: f64) -> KpiModel {
        KpiModel { beta0: b0, beta1: b1, y_lo: lo, y_hi: hi, n_samples: 0, residual_rms: 0.0 }
    }

    #[test]
    fn cost_examples() {
        let flat = KpiModel::flat(3.0);
        let r = row(&[(1, 2.0), (2, 1.0)]);
        let w = weights(&r).unwrap();
        for a in [0.1, 0.5, 1.0] {
            let c = cost(&[flat.clone(), flat.clone(), flat.clone()], &w, &r, 1, a).unwrap();
            assert!((c - 6.0).abs() < 1e-9);
        }

        let m = logistic(1.0, 4.0, 1.0, -2.0);
        let single = row(&[(9, 1.0)]);
        let c = cost(&[m.clone(), m.clone()], &[1.0], &single, 9, 0.3).unwrap();
        assert_eq!(c, 2.0 * m.predict(0.3));

        // Two neighbours, hand composition: I = {1: 4, 2: 1}, s = 1,
        // alpha_s = 0.4 -> alpha_2 = 0.4 + 0.6 * 0.75 = 0.85, w = {0.8, 0.2}.
        let mc = logistic(0.0, 10.0, 0.0, 1.0);
        let m1 = logistic(2.0, 6.0, 1.0, -1.0);
        let m2 = logistic(5.0, 9.0, -1.0, 2.0);
        let r = row(&[(1, 4.0), (2, 1.0)]);
        let w = weights(&r).unwrap();
        let got = cost(&[mc.clone(), m1.clone(), m2.clone()], &w, &r, 1, 0.4).unwrap();
        let expected = 10.0 * crate::statlearn::f_log(0.4)
            + 0.8 * (2.0 + 4.0 * crate::statlearn::f_log(1.0 - 0.4))
            + 0.2 * (5.0 + 4.0 * crate::statlearn::f_log(-1.0 + 2.0 * 0.85));
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn grid_enumeration() {
        assert_eq!(alpha_grid(0.25).unwrap(), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(alpha_grid(0.0125).unwrap().len(), 80);
        assert!(alpha_grid(0.3).is_err());
        assert!(alpha_grid(0.0).is_err());
    }

    #[test]
    fn constraint_excludes_low_alpha() {
        let r = row(&[(1, 1.0)]);
        let w = [1.0];
        // Cost prefers small alpha; BCR of the faulty cell exceeds 5 % below 0.5.
        let models = ZoneModels {
            ftt: vec![logistic(0.0, 10.0, -5.0, 10.0), KpiModel::flat(1.0)],
            bcr: vec![logistic(0.0, 10.0, 20.0, -40.0), KpiModel::flat(0.0)],
        };
        let p = AlphaProblem { models: &models, coupling: &r, weights: &w, s: 1, bcr_threshold: 5.0 };
        let choice = optimize_alpha_s(&p, 0.0125, 0.9).unwrap();
        assert!(choice.feasible);
        assert!(choice.alpha_s > 0.5);
    }

    #[test]
    fn infeasible_grid_minimizes_violation() {
        let r = row(&[(1, 1.0)]);
        let w = [1.0];
        let models = ZoneModels {
            ftt: vec![KpiModel::flat(1.0), KpiModel::flat(1.0)],
            bcr: vec![logistic(10.0, 20.0, 0.0, -4.0), KpiModel::flat(0.0)],
        };
        let p = AlphaProblem { models: &models, coupling: &r, weights: &w, s: 1, bcr_threshold: 5.0 };
        let choice = optimize_alpha_s(&p, 0.05, 0.2).unwrap();
        assert!(!choice.feasible);
        assert_eq!(choice.alpha_s, 1.0);
    }

    #[test]
    fn flat_cost_keeps_current_alpha() {
        let r = row(&[(1, 1.0), (2, 0.5)]);
        let w = weights(&r).unwrap();
        let flat = KpiModel::flat(2.0);
        let models = ZoneModels { ftt: vec![flat.clone(); 3], bcr: vec![KpiModel::flat(0.0); 3] };
        let p = AlphaProblem { models: &models, coupling: &r, weights: &w, s: 1, bcr_threshold: 5.0 };
        assert_eq!(optimize_alpha_s(&p, 0.0125, 0.5).unwrap().alpha_s, 0.5);
    }

    #[test]
    fn stop_rule_on_table_sequence() {
        let seq = [0.27, 0.35, 0.40, 0.44, 0.44, 0.47, 0.46];
        let mut monitor = ConvergenceMonitor::new(0.01);
        let stops: Vec<bool> = seq.iter().map(|&a| monitor.observe(a)).collect();
        assert_eq!(stops, vec![false, false, false, false, false, false, true]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = HealingConfig::new(0, vec![1, 2, 3]);
        assert!(cfg.validate().is_ok());
        cfg.ns1.push(0);
        assert!(cfg.validate().is_err());
        cfg.ns1.pop();
        cfg.init_alphas = vec![0.5, 0.5, 0.2];
        assert!(cfg.validate().is_err());
        cfg.init_alphas = vec![0.5, 0.2];
        assert!(cfg.validate().is_err());
    }

    /// Noiseless analytic zone: FTT and BCR of each eNB are exact logistic
    /// functions of its own alpha.
    struct Analytic {
        ftt: Vec<KpiModel>,
        bcr: Vec<KpiModel>,
        zone: Vec<usize>,
    }

    impl KpiSource for Analytic {
        fn measure(
            &mut self,
            _k: usize,
            alpha_s: f64,
            neighbours: &[(usize, f64)],
        ) -> Result<Vec<Measurement>, Box<dyn std::error::Error + Send + Sync>> {
            let inputs = std::iter::once((self.zone[0], alpha_s)).chain(neighbours.iter().copied());
            Ok(inputs
                .enumerate()
                .map(|(z, (enb, x))| {
                    assert_eq!(enb, self.zone[z]);
                    Measurement { enb, alpha: x, ftt: Some(self.ftt[z].predict(x)), bcr: Some(self.bcr[z].predict(x)) }
                })
                .collect())
        }
    }

    #[test]
    fn noiseless_loop_finds_grid_optimum() {
        let zone = vec![0, 1, 2];
        let ftt = vec![logistic(8.0, 14.0, -3.0, 6.0), logistic(6.0, 12.0, 3.0, -8.0), logistic(6.0, 12.0, 3.0, -8.0)];
        let bcr = vec![logistic(1.0, 6.0, -2.0, 3.0), logistic(1.0, 10.0, 3.0, -9.0), KpiModel::flat(1.0)];
        let matrix = InterferenceMatrix::from_rows(vec![vec![0.0, 2.0, 1.0], vec![0.0; 3], vec![0.0; 3]]);
        let mut cfg = HealingConfig::new(0, vec![1, 2]);
        cfg.gamma = 0.0;
        let mut source = Analytic { ftt: ftt.clone(), bcr: bcr.clone(), zone };
        let state = slah_run(&mut source, &cfg, &matrix).unwrap();

        let r = CouplingRow::from_matrix(&matrix, 0, &[1, 2]);
        let w = weights(&r).unwrap();
        let truth = ZoneModels { ftt, bcr };
        let p = AlphaProblem { models: &truth, coupling: &r, weights: &w, s: 1, bcr_threshold: 5.0 };
        let optimum = optimize_alpha_s(&p, 0.0125, 0.5).unwrap();
        let optimization_steps = state.history.iter().filter(|h| h.phase == Phase::Optimization).count();
        assert!(optimization_steps <= 5, "{optimization_steps}");
        assert!((state.current_alpha_s - optimum.alpha_s).abs() <= 0.0125 + 1e-12, "{} vs {}", state.current_alpha_s, optimum.alpha_s);
        assert_eq!(state.iteration, state.data.len());
        assert_eq!(state.data.len(), 5 + optimization_steps);
    }
}
