//! Discrete-time downlink simulator with soft-frequency-reuse ICIC.
//!
//! Time advances in 1 s steps. Each step draws Poisson call arrivals per
//! cell, runs RSRP-based admission, reallocates PRBs with protected-band
//! priority for the worst-quality users, computes per-PRB SINR and
//! throughput, drains file transfers and accumulates KPIs and the
//! interference matrix over the measurement window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::scenario::{
    dbm_to_mw, pathloss_db, NetworkLayout, PropagationParams, TrafficParams, PRB_BANDWIDTH_HZ,
};

/// Admission threshold on the best-server RSRP.
pub const RSRP_ADMISSION_THRESHOLD_DBM: f64 = -104.0;

/// Reference-signal power is measured per resource element; one PRB has 12
/// subcarriers.
const SUBCARRIERS_PER_PRB: f64 = 12.0;

/// Pilot-based quality metric: serving pilot power over the sum of the other
/// pilots plus noise. All powers are linear.
pub fn quality_metric(pilot_powers_mw: &[f64], serving: usize, noise_mw: f64) -> f64 {
    let interference: f64 = pilot_powers_mw
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != serving)
        .map(|(_, p)| p)
        .sum();
    pilot_powers_mw[serving] / (interference + noise_mw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admit,
    Block,
}

pub fn admit(rsrp_dbm: f64, free_prbs: usize) -> Admission {
    if rsrp_dbm > RSRP_ADMISSION_THRESHOLD_DBM && free_prbs >= 1 {
        Admission::Admit
    } else {
        Admission::Block
    }
}

/// Parameters of the SINR-to-spectral-efficiency step table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    /// Lowest decodable SINR; the rate is zero below it.
    pub min_sinr_db: f64,
    pub levels: usize,
    /// Fraction of Shannon capacity achieved.
    pub shannon_attenuation: f64,
    /// Highest spectral efficiency, bits/s/Hz.
    pub max_efficiency: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self { min_sinr_db: -6.5, levels: 15, shannon_attenuation: 0.75, max_efficiency: 4.8 }
    }
}

/// Monotone step table from SINR (dB) to spectral efficiency (bits/s/Hz).
///
/// Thresholds are spaced evenly in dB between `min_sinr_db` and the SINR at
/// which the attenuated Shannon bound reaches `max_efficiency`; each step
/// carries the attenuated Shannon efficiency at its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    steps: Vec<(f64, f64)>,
}

impl LinkTable {
    pub fn new(params: &LinkParams) -> Self {
        let levels = params.levels.max(1);
        let att = params.shannon_attenuation;
        let sat_db = 10.0 * (2f64.powf(params.max_efficiency / att) - 1.0).log10();
        let span = (sat_db - params.min_sinr_db).max(0.0);
        let steps = (0..levels)
            .map(|k| {
                let th = if levels == 1 {
                    params.min_sinr_db
                } else {
                    params.min_sinr_db + span * k as f64 / (levels - 1) as f64
                };
                let eff = (att * (1.0 + 10f64.powf(th / 10.0)).log2()).min(params.max_efficiency);
                (th, eff)
            })
            .collect();
        Self { steps }
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn efficiency(&self, sinr_db: f64) -> f64 {
        let idx = self.steps.partition_point(|&(th, _)| th <= sinr_db);
        if idx == 0 {
            0.0
        } else {
            self.steps[idx - 1].1
        }
    }

    pub fn max_efficiency(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.1)
    }

    /// Bit rate of one PRB at `sinr_db`.
    pub fn prb_rate(&self, sinr_db: f64) -> f64 {
        PRB_BANDWIDTH_HZ * self.efficiency(sinr_db)
    }
}

impl Default for LinkTable {
    fn default() -> Self {
        Self::new(&LinkParams::default())
    }
}

/// Bit rate of `n_prbs` PRBs that all see `sinr_db`.
pub fn throughput(sinr_db: f64, n_prbs: usize, table: &LinkTable) -> f64 {
    n_prbs as f64 * table.prb_rate(sinr_db)
}

/// Per-session input to the PRB scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocRequest {
    pub quality: f64,
    /// Arrival order; smaller is earlier.
    pub arrival_seq: u64,
}

/// Assigns PRBs of one eNB to its sessions.
///
/// Every session first receives `min` PRBs in ascending quality order, then
/// PRBs beyond the minimum (up to `max`) go out first-come first-served.
/// Physical PRBs are then handed out in ascending quality order, protected
/// band first, so the worst users land on the full-power subband. The result
/// is indexed like `requests`.
pub fn allocate_prbs(
    requests: &[AllocRequest],
    order: &[usize],
    min_prbs: usize,
    max_prbs: usize,
) -> Vec<Vec<usize>> {
    let capacity = order.len();
    let mut by_quality: Vec<usize> = (0..requests.len()).collect();
    by_quality.sort_by(|&a, &b| {
        requests[a]
            .quality
            .total_cmp(&requests[b].quality)
            .then(requests[a].arrival_seq.cmp(&requests[b].arrival_seq))
    });
    let mut by_arrival: Vec<usize> = (0..requests.len()).collect();
    by_arrival.sort_by_key(|&i| (requests[i].arrival_seq, i));

    let mut counts = vec![0usize; requests.len()];
    let mut left = capacity;
    for &i in &by_quality {
        let n = min_prbs.min(left);
        counts[i] = n;
        left -= n;
    }
    for &i in &by_arrival {
        if left == 0 {
            break;
        }
        if counts[i] < min_prbs {
            continue;
        }
        let n = (max_prbs - min_prbs).min(left);
        counts[i] += n;
        left -= n;
    }

    let mut out = vec![Vec::new(); requests.len()];
    let mut cursor = 0;
    for &i in &by_quality {
        out[i] = order[cursor..cursor + counts[i]].to_vec();
        cursor += counts[i];
    }
    out
}

/// Transmit power of every PRB of every eNB at one step, milliwatts; zero
/// where the PRB is not allocated.
#[derive(Debug, Clone, PartialEq)]
pub struct TxMap {
    pub power_mw: Vec<Vec<f64>>,
}

impl TxMap {
    pub fn idle(n_enbs: usize, n_prbs: usize) -> Self {
        Self { power_mw: vec![vec![0.0; n_prbs]; n_enbs] }
    }
}

/// SINR in dB on `prb` for a user served by `serving`, given linear channel
/// gains from every eNB to the user.
pub fn sinr_per_prb(gains: &[f64], serving: usize, prb: usize, tx: &TxMap, noise_mw: f64) -> f64 {
    let signal = tx.power_mw[serving][prb] * gains[serving];
    let interference: f64 = tx
        .power_mw
        .iter()
        .zip(gains)
        .enumerate()
        .filter(|&(j, _)| j != serving)
        .map(|(_, (p, g))| p[prb] * g)
        .sum();
    10.0 * (signal / (interference + noise_mw)).log10()
}

/// Time-averaged downlink interference. Element `(c, j)` is interference
/// power received from eNB `j` by users attached to `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl InterferenceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let values = rows.into_iter().flat_map(|r| {
            assert_eq!(r.len(), n, "interference matrix must be square");
            r
        });
        Self { n, values: values.collect() }
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; n * n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, c: usize, j: usize) -> f64 {
        self.values[c * self.n + j]
    }

    /// `I_cj` for each `j` in `cols`, in that order.
    pub fn row(&self, c: usize, cols: &[usize]) -> Vec<f64> {
        cols.iter().map(|&j| self.get(c, j)).collect()
    }
}

/// Running sum behind [`InterferenceMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceAccumulator {
    n: usize,
    sums: Vec<f64>,
    seconds: u64,
}

/// One user as seen by the interference accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotUser {
    pub serving: usize,
    pub prbs: Vec<usize>,
    /// Linear channel gain from every eNB.
    pub gains: Vec<f64>,
}

/// Allocation state of the whole network during one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnapshot {
    pub tx: TxMap,
    pub users: Vec<SnapshotUser>,
}

impl InterferenceAccumulator {
    pub fn new(n: usize) -> Self {
        Self { n, sums: vec![0.0; n * n], seconds: 0 }
    }

    pub fn seconds(&self) -> u64 {
        self.seconds
    }

    /// Adds one second of interference: each user collects, from every
    /// other eNB, the power that eNB radiates on the user's own PRBs.
    pub fn record_step<'a>(&mut self, tx: &TxMap, users: impl IntoIterator<Item = (usize, &'a [usize], &'a [f64])>) {
        for (c, prbs, gains) in users {
            for j in (0..self.n).filter(|&j| j != c) {
                let row = &tx.power_mw[j];
                let mut acc = 0.0;
                for &prb in prbs {
                    acc += row[prb] * gains[j];
                }
                self.sums[c * self.n + j] += acc;
            }
        }
        self.seconds += 1;
    }

    pub fn record(&mut self, snapshot: &StepSnapshot) {
        self.record_step(
            &snapshot.tx,
            snapshot.users.iter().map(|u| (u.serving, u.prbs.as_slice(), u.gains.as_slice())),
        );
    }

    /// Divides the accumulated sums by the window length.
    pub fn estimate(&self) -> Result<InterferenceMatrix, SimError> {
        if self.seconds == 0 {
            return Err(SimError::EmptyWindow);
        }
        let t = self.seconds as f64;
        Ok(InterferenceMatrix { n: self.n, values: self.sums.iter().map(|s| s / t).collect() })
    }
}

pub fn estimate_interference_matrix(acc: &InterferenceAccumulator) -> Result<InterferenceMatrix, SimError> {
    acc.estimate()
}

/// An active file transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSession {
    pub id: u64,
    pub serving: usize,
    pub position: [f64; 2],
    pub remaining_bits: f64,
    pub quality: f64,
    pub allocated_prbs: Vec<usize>,
    pub arrival_time: u64,
    pub shadowing_db: Vec<f64>,
    /// Linear gain (pathloss and shadowing) from every eNB.
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnbCounters {
    pub arrivals: u64,
    pub blocks: u64,
    pub completions: u64,
    pub transfer_time_sum: f64,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub time: u64,
    pub sessions: Vec<UserSession>,
    rng: ChaCha8Rng,
    next_id: u64,
    /// Counters since time 0.
    pub lifetime: Vec<EnbCounters>,
    /// Counters restricted to the measurement window.
    pub window: Vec<EnbCounters>,
    pub interference: InterferenceAccumulator,
    warmup: u64,
}

impl SimState {
    pub fn active_per_enb(&self, n: usize) -> Vec<u64> {
        let mut out = vec![0; n];
        for s in &self.sessions {
            out[s.serving] += 1;
        }
        out
    }
}

/// What happened during one step, for tracing.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: u64,
    pub arrivals: Vec<u64>,
    pub blocks: Vec<u64>,
    /// `(eNB, transfer time in seconds)` for each session finishing this step.
    pub completions: Vec<(usize, f64)>,
    pub snapshot: StepSnapshot,
    /// `(session id, per-PRB SINR in dB)` for every served session.
    pub sinr_db: Vec<(u64, Vec<f64>)>,
}

/// Measurement window of an episode, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeWindow {
    pub duration: u64,
    pub warmup: u64,
}

impl Default for EpisodeWindow {
    fn default() -> Self {
        Self { duration: 2500, warmup: 500 }
    }
}

impl EpisodeWindow {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.warmup >= self.duration {
            return Err(SimError::Window { warmup: self.warmup, duration: self.duration });
        }
        Ok(())
    }
}

/// Per-eNB KPIs over the measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct EnbKpi {
    pub enb: usize,
    pub arrivals: u64,
    pub blocks: u64,
    pub completions: u64,
    /// Percent of arrivals blocked; `None` without arrivals.
    pub bcr: Option<f64>,
    /// Mean transfer time in seconds; `None` without completions.
    pub ftt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub enbs: Vec<EnbKpi>,
}

impl KpiReport {
    pub fn from_counters(counters: &[EnbCounters]) -> Self {
        let enbs = counters
            .iter()
            .enumerate()
            .map(|(enb, c)| EnbKpi {
                enb,
                arrivals: c.arrivals,
                blocks: c.blocks,
                completions: c.completions,
                bcr: (c.arrivals > 0).then(|| 100.0 * c.blocks as f64 / c.arrivals as f64),
                ftt: (c.completions > 0).then(|| c.transfer_time_sum / c.completions as f64),
            })
            .collect();
        Self { enbs }
    }

    /// Network mean of the present BCR values.
    pub fn mean_bcr(&self) -> Option<f64> {
        mean(self.enbs.iter().filter_map(|e| e.bcr))
    }

    pub fn mean_ftt(&self) -> Option<f64> {
        mean(self.enbs.iter().filter_map(|e| e.ftt))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Session bookkeeping at episode end, from time 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conservation {
    pub arrivals: u64,
    pub blocks: u64,
    pub completions: u64,
    pub active: u64,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub report: KpiReport,
    pub matrix: InterferenceMatrix,
    pub conservation: Vec<Conservation>,
}

/// Immutable simulation context: layout, propagation, traffic and link table.
#[derive(Debug, Clone)]
pub struct Simulator {
    layout: NetworkLayout,
    propagation: PropagationParams,
    traffic: TrafficParams,
    link: LinkTable,
    full_power_mw: Vec<f64>,
    noise_mw: f64,
    order: Vec<Vec<usize>>,
}

impl Simulator {
    pub fn new(
        layout: NetworkLayout,
        propagation: PropagationParams,
        traffic: TrafficParams,
        link: LinkTable,
    ) -> Result<Self, SimError> {
        layout.validate()?;
        propagation.validate()?;
        traffic.validate()?;
        let total = layout.enbs.first().map_or(0, |e| e.total_prbs);
        if layout.enbs.iter().any(|e| e.total_prbs != total) {
            return Err(SimError::MixedBandPlans);
        }
        let full_power_mw = layout.enbs.iter().map(|e| dbm_to_mw(e.max_power_dbm)).collect();
        let order = layout.enbs.iter().map(|e| e.allocation_order()).collect();
        let noise_mw = propagation.noise_mw();
        Ok(Self { layout, propagation, traffic, link, full_power_mw, noise_mw, order })
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn traffic(&self) -> &TrafficParams {
        &self.traffic
    }

    pub fn link(&self) -> &LinkTable {
        &self.link
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    fn n_prbs(&self) -> usize {
        self.layout.enbs.first().map_or(0, |e| e.total_prbs)
    }

    /// Lower bound on any transfer time.
    pub fn min_transfer_time(&self) -> f64 {
        let peak = self.traffic.max_prbs_per_user as f64 * PRB_BANDWIDTH_HZ * self.link.max_efficiency();
        self.traffic.file_bits() / peak
    }

    pub fn initial_state(&self, seed: u64, warmup: u64) -> SimState {
        let n = self.layout.len();
        SimState {
            time: 0,
            sessions: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
            lifetime: vec![EnbCounters::default(); n],
            window: vec![EnbCounters::default(); n],
            interference: InterferenceAccumulator::new(n),
            warmup,
        }
    }

    fn check_alphas(&self, alphas: &[f64]) -> Result<(), SimError> {
        let mut layout = self.layout.clone();
        layout.set_alphas(alphas)?;
        Ok(())
    }

    /// Places a caller-built session directly into the state, bypassing
    /// arrivals and admission. Gains and quality are derived from the
    /// position and shadowing.
    pub fn insert_session(&self, state: &mut SimState, position: [f64; 2], shadowing_db: Vec<f64>, serving: usize) -> u64 {
        let gains = self.gains(position, &shadowing_db);
        let pilots: Vec<f64> = gains.iter().zip(&self.full_power_mw).map(|(g, p)| g * p).collect();
        let id = state.next_id;
        state.next_id += 1;
        state.sessions.push(UserSession {
            id,
            serving,
            position,
            remaining_bits: self.traffic.file_bits(),
            quality: quality_metric(&pilots, serving, self.noise_mw),
            allocated_prbs: Vec::new(),
            arrival_time: state.time,
            shadowing_db,
            gains,
        });
        state.lifetime[serving].arrivals += 1;
        if state.time >= state.warmup {
            state.window[serving].arrivals += 1;
        }
        id
    }

    fn gains(&self, position: [f64; 2], shadowing_db: &[f64]) -> Vec<f64> {
        self.layout
            .enbs
            .iter()
            .zip(shadowing_db)
            .map(|(e, sh)| {
                let d = (position[0] - e.position[0]).hypot(position[1] - e.position[1]);
                10f64.powf((sh - pathloss_db(d, &self.propagation)) / 10.0)
            })
            .collect()
    }

    fn sample_in_cell(&self, rng: &mut ChaCha8Rng, cell: usize) -> [f64; 2] {
        let r = self.layout.cell_radius;
        let c = self.layout.enbs[cell].position;
        loop {
            let p = [c[0] + r * (2.0 * rng.random::<f64>() - 1.0), c[1] + r * (2.0 * rng.random::<f64>() - 1.0)];
            if self.layout.in_hex_cell(cell, p) {
                return p;
            }
        }
    }

    fn arrivals(&self, state: &mut SimState, record: Option<&mut StepRecord>) {
        let n = self.layout.len();
        let in_window = state.time >= state.warmup;
        let mut arrived = vec![0u64; n];
        let mut blocked = vec![0u64; n];
        let poisson = (self.traffic.arrival_rate > 0.0).then(|| Poisson::new(self.traffic.arrival_rate).unwrap());
        let shadow = Normal::new(0.0, self.propagation.shadowing_stddev).unwrap();
        let min_prbs = self.traffic.min_prbs_per_user;
        let mut active = state.active_per_enb(n);
        for cell in 0..n {
            let count = match &poisson {
                Some(p) => p.sample(&mut state.rng) as u64,
                None => 0,
            };
            for _ in 0..count {
                let position = self.sample_in_cell(&mut state.rng, cell);
                let shadowing_db: Vec<f64> = (0..n).map(|_| shadow.sample(&mut state.rng)).collect();
                let gains = self.gains(position, &shadowing_db);
                let pilots: Vec<f64> = gains.iter().zip(&self.full_power_mw).map(|(g, p)| g * p).collect();
                let serving = argmax(&pilots);
                let rsrp_dbm = 10.0 * (pilots[serving] / SUBCARRIERS_PER_PRB).log10();
                let capacity = self.layout.enbs[serving].total_prbs;
                let free = capacity.saturating_sub(active[serving] as usize * min_prbs);

                arrived[serving] += 1;
                state.lifetime[serving].arrivals += 1;
                if in_window {
                    state.window[serving].arrivals += 1;
                }
                match admit(rsrp_dbm, free) {
                    Admission::Block => {
                        blocked[serving] += 1;
                        state.lifetime[serving].blocks += 1;
                        if in_window {
                            state.window[serving].blocks += 1;
                        }
                    }
                    Admission::Admit => {
                        active[serving] += 1;
                        let id = state.next_id;
                        state.next_id += 1;
                        state.sessions.push(UserSession {
                            id,
                            serving,
                            position,
                            remaining_bits: self.traffic.file_bits(),
                            quality: quality_metric(&pilots, serving, self.noise_mw),
                            allocated_prbs: Vec::new(),
                            arrival_time: state.time,
                            shadowing_db,
                            gains,
                        });
                    }
                }
            }
        }
        if let Some(r) = record {
            r.arrivals = arrived;
            r.blocks = blocked;
        }
    }

    /// Advances the state by one second with the given per-eNB alphas.
    pub fn step(&self, state: &mut SimState, alphas: &[f64]) -> Result<(), SimError> {
        self.check_alphas(alphas)?;
        self.advance(state, alphas, None);
        Ok(())
    }

    /// Like [`Simulator::step`], also returning a full record of the step.
    pub fn step_traced(&self, state: &mut SimState, alphas: &[f64]) -> Result<StepRecord, SimError> {
        self.check_alphas(alphas)?;
        let n = self.layout.len();
        let mut record = StepRecord {
            time: state.time,
            arrivals: vec![0; n],
            blocks: vec![0; n],
            completions: Vec::new(),
            snapshot: StepSnapshot { tx: TxMap::idle(n, self.n_prbs()), users: Vec::new() },
            sinr_db: Vec::new(),
        };
        self.advance(state, alphas, Some(&mut record));
        Ok(record)
    }

    fn advance(&self, state: &mut SimState, alphas: &[f64], mut record: Option<&mut StepRecord>) {
        let n = self.layout.len();
        let n_prbs = self.n_prbs();
        self.arrivals(state, record.as_deref_mut());

        // Scheduling, per eNB.
        let mut tx = TxMap::idle(n, n_prbs);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, s) in state.sessions.iter().enumerate() {
            members[s.serving].push(i);
        }
        for (enb, idx) in members.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let requests: Vec<AllocRequest> = idx
                .iter()
                .map(|&i| AllocRequest { quality: state.sessions[i].quality, arrival_seq: state.sessions[i].id })
                .collect();
            let alloc = allocate_prbs(
                &requests,
                &self.order[enb],
                self.traffic.min_prbs_per_user,
                self.traffic.max_prbs_per_user,
            );
            let cfg = &self.layout.enbs[enb];
            for (&i, prbs) in idx.iter().zip(alloc) {
                for &prb in &prbs {
                    let factor = if cfg.is_protected(prb) { 1.0 } else { alphas[enb] };
                    tx.power_mw[enb][prb] = factor * self.full_power_mw[enb];
                }
                state.sessions[i].allocated_prbs = prbs;
            }
        }

        // Link adaptation and transfer progress.
        let t = state.time;
        let in_window = t >= state.warmup;
        let mut completions = Vec::new();
        for s in state.sessions.iter_mut() {
            let mut rate = 0.0;
            let mut sinrs = Vec::new();
            for &prb in &s.allocated_prbs {
                let sinr = sinr_per_prb(&s.gains, s.serving, prb, &tx, self.noise_mw);
                rate += self.link.prb_rate(sinr);
                if record.is_some() {
                    sinrs.push(sinr);
                }
            }
            if let Some(r) = record.as_deref_mut() {
                r.sinr_db.push((s.id, sinrs));
            }
            s.remaining_bits = (s.remaining_bits - rate).max(0.0);
            if s.remaining_bits <= 0.0 {
                completions.push((s.serving, (t + 1 - s.arrival_time) as f64));
            }
        }

        if in_window {
            state.interference.record_step(
                &tx,
                state.sessions.iter().map(|s| (s.serving, s.allocated_prbs.as_slice(), s.gains.as_slice())),
            );
        }
        if let Some(r) = record.as_deref_mut() {
            r.snapshot.users = state
                .sessions
                .iter()
                .map(|s| SnapshotUser { serving: s.serving, prbs: s.allocated_prbs.clone(), gains: s.gains.clone() })
                .collect();
        }

        for &(enb, ftt) in &completions {
            state.lifetime[enb].completions += 1;
            state.lifetime[enb].transfer_time_sum += ftt;
            if in_window {
                state.window[enb].completions += 1;
                state.window[enb].transfer_time_sum += ftt;
            }
        }
        state.sessions.retain(|s| s.remaining_bits > 0.0);
        if let Some(r) = record {
            r.snapshot.tx = tx;
            r.completions = completions;
        }
        state.time += 1;
    }

    /// Runs `window.duration` steps from an empty network. KPIs and the
    /// interference matrix cover `[warmup, duration)`.
    pub fn run_episode(&self, alphas: &[f64], window: EpisodeWindow, seed: u64) -> Result<EpisodeOutcome, SimError> {
        window.validate()?;
        self.check_alphas(alphas)?;
        let mut state = self.initial_state(seed, window.warmup);
        for _ in 0..window.duration {
            self.advance(&mut state, alphas, None);
        }
        Ok(self.outcome(&state))
    }

    /// Runs an episode and returns the record of every step.
    pub fn run_episode_traced(
        &self,
        alphas: &[f64],
        window: EpisodeWindow,
        seed: u64,
    ) -> Result<(EpisodeOutcome, Vec<StepRecord>), SimError> {
        window.validate()?;
        let mut state = self.initial_state(seed, window.warmup);
        let mut records = Vec::with_capacity(window.duration as usize);
        for _ in 0..window.duration {
            records.push(self.step_traced(&mut state, alphas)?);
        }
        Ok((self.outcome(&state), records))
    }

    /// KPIs, interference matrix and conservation counts of a state.
    pub fn outcome(&self, state: &SimState) -> EpisodeOutcome {
        let n = self.layout.len();
        let active = state.active_per_enb(n);
        let conservation = state
            .lifetime
            .iter()
            .zip(active)
            .map(|(c, active)| Conservation { arrivals: c.arrivals, blocks: c.blocks, completions: c.completions, active })
            .collect();
        EpisodeOutcome {
            report: KpiReport::from_counters(&state.window),
            matrix: state.interference.estimate().unwrap_or_else(|_| InterferenceMatrix::zeros(n)),
            conservation,
        }
    }
}

/// Index of the largest element; ties go to the smallest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_hex_grid, EnbConfig};

    #[test]
    fn quality_metric_examples() {
        assert_eq!(quality_metric(&[1.0], 0, 0.5), 2.0);
        assert!((quality_metric(&[1.0, 1.0], 0, 1e-15) - 1.0).abs() < 1e-12);
        assert!((quality_metric(&[2.0, 0.5, 0.3], 0, 0.2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn admission_examples() {
        assert_eq!(admit(-100.0, 5), Admission::Admit);
        assert_eq!(admit(-104.0, 5), Admission::Block);
        assert_eq!(admit(-90.0, 0), Admission::Block);
    }

    fn order(protected: usize) -> Vec<usize> {
        EnbConfig { protected_subband: protected, ..Default::default() }.allocation_order()
    }

    #[test]
    fn allocation_with_spare_protected_capacity() {
        let req = [AllocRequest { quality: 0.1, arrival_seq: 0 }, AllocRequest { quality: 5.0, arrival_seq: 1 }];
        let alloc = allocate_prbs(&req, &order(0), 1, 4);
        assert_eq!(alloc[0], vec![0, 1, 2, 3]);
        assert_eq!(alloc[1], vec![4, 5, 6, 7]);
    }

    #[test]
    fn allocation_spills_into_centre_band() {
        let req = [
            AllocRequest { quality: 9.9, arrival_seq: 0 },
            AllocRequest { quality: 0.2, arrival_seq: 1 },
            AllocRequest { quality: 0.1, arrival_seq: 2 },
        ];
        let alloc = allocate_prbs(&req, &order(2), 1, 4);
        assert_eq!(alloc[2], vec![16, 17, 18, 19]);
        assert_eq!(alloc[1], vec![20, 21, 22, 23]);
        assert_eq!(alloc[0], vec![0, 1, 2, 3]);
    }

    #[test]
    fn allocation_at_full_load_gives_one_prb_each() {
        let req: Vec<_> = (0..24).map(|i| AllocRequest { quality: (i * 7 % 24) as f64, arrival_seq: i }).collect();
        let alloc = allocate_prbs(&req, &order(1), 1, 4);
        let mut all: Vec<usize> = alloc.iter().flatten().copied().collect();
        assert!(alloc.iter().all(|a| a.len() == 1));
        all.sort();
        assert_eq!(all, (0..24).collect::<Vec<_>>());
    }

    #[test]
    fn extra_prbs_go_first_come_first_served() {
        // 10 minimum PRBs leave 14 extras: three each for the four earliest
        // arrivals, the last two for the fifth.
        let req: Vec<_> = (0..10).map(|i| AllocRequest { quality: (10 - i) as f64, arrival_seq: i }).collect();
        let alloc = allocate_prbs(&req, &order(0), 1, 4);
        let counts: Vec<usize> = alloc.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![4, 4, 4, 4, 3, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn link_table_shape() {
        let table = LinkTable::default();
        assert_eq!(table.steps().len(), 15);
        assert_eq!(table.efficiency(-7.0), 0.0);
        assert!(table.efficiency(-6.5) > 0.0);
        assert!((table.max_efficiency() - 4.8).abs() < 1e-12);
        assert_eq!(table.efficiency(40.0), table.max_efficiency());
        let mut prev = 0.0;
        for k in 0..400 {
            let e = table.efficiency(-10.0 + 0.1 * k as f64);
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn throughput_examples() {
        let table = LinkTable::default();
        assert_eq!(throughput(-20.0, 4, &table), 0.0);
        assert_eq!(throughput(10.0, 2, &table), 2.0 * throughput(10.0, 1, &table));
        assert!(throughput(5.0, 1, &table) <= throughput(6.0, 1, &table));
    }

    #[test]
    fn sinr_examples() {
        let mut tx = TxMap::idle(2, 24);
        tx.power_mw[0][3] = 1000.0;
        let gains = [1e-10, 1e-10];
        let noise = 1e-9;
        let isolated = sinr_per_prb(&gains, 0, 3, &tx, noise);
        assert!((isolated - 20.0).abs() < 1e-9);

        // Centre-band interferer at alpha = 1 and alpha = 0.5, negligible noise.
        tx.power_mw[1][3] = 1000.0;
        let full = sinr_per_prb(&gains, 0, 3, &tx, 1e-30);
        assert!(full.abs() < 1e-9);
        tx.power_mw[1][3] = 500.0;
        let half = sinr_per_prb(&gains, 0, 3, &tx, 1e-30);
        assert!((half - full - 10.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn accumulator_examples() {
        let mut acc = InterferenceAccumulator::new(2);
        assert!(acc.estimate().is_err());
        let mut tx = TxMap::idle(2, 24);
        tx.power_mw[1][5] = 4.0;
        let user = SnapshotUser { serving: 0, prbs: vec![5], gains: vec![1.0, 0.25] };
        for _ in 0..3 {
            acc.record(&StepSnapshot { tx: tx.clone(), users: vec![user.clone()] });
        }
        let m = acc.estimate().unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    fn small_sim(rate: f64) -> Simulator {
        let layout = build_hex_grid(1, 500.0, &EnbConfig::default()).unwrap();
        let traffic = TrafficParams { arrival_rate: rate, ..Default::default() };
        Simulator::new(layout, PropagationParams::default(), traffic, LinkTable::default()).unwrap()
    }

    #[test]
    fn empty_network_only_advances_time() {
        let sim = small_sim(0.0);
        let mut state = sim.initial_state(1, 0);
        sim.step(&mut state, &[0.5; 7]).unwrap();
        assert_eq!(state.time, 1);
        assert!(state.sessions.is_empty());
        assert!(state.lifetime.iter().all(|c| *c == EnbCounters::default()));
    }

    #[test]
    fn zero_traffic_episode_reports_absent_kpis() {
        let sim = small_sim(0.0);
        let out = sim.run_episode(&[0.5; 7], EpisodeWindow { duration: 20, warmup: 5 }, 3).unwrap();
        assert!(out.report.enbs.iter().all(|e| e.bcr.is_none() && e.ftt.is_none()));
        assert_eq!(out.report.mean_bcr(), None);
    }

    #[test]
    fn rejects_bad_window_and_alphas() {
        let sim = small_sim(0.1);
        assert!(sim.run_episode(&[0.5; 7], EpisodeWindow { duration: 10, warmup: 10 }, 0).is_err());
        assert!(sim.run_episode(&[0.5; 6], EpisodeWindow { duration: 10, warmup: 1 }, 0).is_err());
        assert!(sim.run_episode(&[0.0; 7], EpisodeWindow { duration: 10, warmup: 1 }, 0).is_err());
    }

    #[test]
    fn single_session_completes_after_ceil_file_over_rate() {
        let sim = small_sim(0.0);
        let mut state = sim.initial_state(0, 0);
        // A user close to eNB 0 with no other traffic sees noise only.
        let id = sim.insert_session(&mut state, [30.0, 0.0], vec![0.0; 7], 0);
        let alphas = [0.5; 7];
        let first = sim.step_traced(&mut state, &alphas).unwrap();
        let sinrs = &first.sinr_db.iter().find(|(s, _)| *s == id).unwrap().1;
        let rate: f64 = sinrs.iter().map(|&s| sim.link().prb_rate(s)).sum();
        let expected = (sim.traffic().file_bits() / rate).ceil() as u64;
        let mut steps = 1;
        let mut completions = first.completions;
        while completions.is_empty() {
            completions = sim.step_traced(&mut state, &alphas).unwrap().completions;
            steps += 1;
        }
        assert_eq!(steps, expected);
        assert_eq!(completions, vec![(0, expected as f64)]);
    }
}
