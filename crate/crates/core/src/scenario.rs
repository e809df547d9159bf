//! Network geometry, radio configuration and propagation.
//!
//! Everything here is a plain value type. An experiment's layout and
//! parameters are built once and then shared read-only by the simulator
//! and the healing loop.

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;

/// Number of disjoint subbands in the soft-reuse band plan.
pub const SUBBANDS: usize = 3;

/// LTE PRB bandwidth in hertz.
pub const PRB_BANDWIDTH_HZ: f64 = 180e3;

/// Converts a power in dBm to milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts a power in milliwatts to dBm.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Configuration of one eNB (one omni cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnbConfig {
    pub id: usize,
    /// Site position in meters.
    pub position: [f64; 2],
    /// Full transmit power `P` of one PRB, dBm. Centre-band PRBs carry `alpha * P`.
    pub max_power_dbm: f64,
    /// Centre-band power reduction factor, in `(0, 1]`.
    pub alpha: f64,
    pub total_prbs: usize,
    pub prbs_per_subband: usize,
    /// Index of the subband served at full power (the edge band).
    pub protected_subband: usize,
}

impl Default for EnbConfig {
    fn default() -> Self {
        Self {
            id: 0,
            position: [0.0, 0.0],
            max_power_dbm: 30.0,
            alpha: 0.5,
            total_prbs: 24,
            prbs_per_subband: 8,
            protected_subband: 0,
        }
    }
}

impl EnbConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ScenarioError::InvalidAlpha { enb: self.id, alpha: self.alpha });
        }
        if self.prbs_per_subband == 0 || self.total_prbs != SUBBANDS * self.prbs_per_subband {
            return Err(ScenarioError::BandPlan {
                total: self.total_prbs,
                per_subband: self.prbs_per_subband,
            });
        }
        if self.protected_subband >= SUBBANDS {
            return Err(ScenarioError::BandPlan {
                total: self.total_prbs,
                per_subband: self.prbs_per_subband,
            });
        }
        Ok(())
    }

    /// Subband that a global PRB index belongs to.
    pub fn subband_of(&self, prb: usize) -> usize {
        prb / self.prbs_per_subband
    }

    pub fn is_protected(&self, prb: usize) -> bool {
        self.subband_of(prb) == self.protected_subband
    }

    /// Transmit power on `prb` in milliwatts when the PRB is in use.
    pub fn prb_power_mw(&self, prb: usize) -> f64 {
        let full = dbm_to_mw(self.max_power_dbm);
        if self.is_protected(prb) {
            full
        } else {
            self.alpha * full
        }
    }

    /// PRB indices in allocation order: the protected subband first, then the
    /// centre subbands in ascending subband order.
    pub fn allocation_order(&self) -> Vec<usize> {
        let width = self.prbs_per_subband;
        let protected = self.protected_subband * width..(self.protected_subband + 1) * width;
        let centre = (0..self.total_prbs).filter(|p| !protected.contains(p));
        protected.clone().chain(centre).collect()
    }
}

/// Set of eNB sites making up the simulated network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub enbs: Vec<EnbConfig>,
    pub inter_site_distance: f64,
    /// Circumradius of the hexagonal cell, `isd / sqrt(3)`.
    pub cell_radius: f64,
}

impl NetworkLayout {
    pub fn len(&self) -> usize {
        self.enbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.enbs.is_empty()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.enbs.iter().map(|e| e.alpha).collect()
    }

    /// Sets every eNB's alpha from `alphas` (indexed by eNB id).
    pub fn set_alphas(&mut self, alphas: &[f64]) -> Result<(), ScenarioError> {
        if alphas.len() != self.enbs.len() {
            return Err(ScenarioError::AlphaCount { expected: self.enbs.len(), got: alphas.len() });
        }
        for (enb, &a) in self.enbs.iter_mut().zip(alphas) {
            if !(a > 0.0 && a <= 1.0) {
                return Err(ScenarioError::InvalidAlpha { enb: enb.id, alpha: a });
            }
            enb.alpha = a;
        }
        Ok(())
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.enbs[a].position, self.enbs[b].position);
        (pa[0] - pb[0]).hypot(pa[1] - pb[1])
    }

    /// eNBs adjacent to `c` (sites one inter-site distance away).
    pub fn first_tier(&self, c: usize) -> Vec<usize> {
        let isd = self.inter_site_distance;
        (0..self.len())
            .filter(|&j| j != c && self.distance(c, j) <= 1.1 * isd)
            .collect()
    }

    /// eNBs two hops from `c` on the hexagonal grid.
    pub fn second_tier(&self, c: usize) -> Vec<usize> {
        let isd = self.inter_site_distance;
        (0..self.len())
            .filter(|&j| {
                let d = self.distance(c, j);
                d > 1.1 * isd && d <= 2.1 * isd
            })
            .collect()
    }

    /// Whether `c` has a complete ring of six first-tier neighbours.
    pub fn has_full_first_tier(&self, c: usize) -> bool {
        self.first_tier(c).len() == 6
    }

    /// True when `point` lies inside the hexagonal cell of eNB `enb`.
    pub fn in_hex_cell(&self, enb: usize, point: [f64; 2]) -> bool {
        let c = self.enbs[enb].position;
        let (dx, dy) = (point[0] - c[0], point[1] - c[1]);
        // Pointy-side hexagon with apothem isd/2: the six neighbour directions
        // are at 0, 60, ..., 300 degrees.
        let apothem = self.inter_site_distance / 2.0;
        (0..6).all(|k| {
            let theta = std::f64::consts::FRAC_PI_3 * k as f64;
            dx * theta.cos() + dy * theta.sin() <= apothem
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (i, e) in self.enbs.iter().enumerate() {
            if e.id != i {
                return Err(ScenarioError::IdOrder { index: i, id: e.id });
            }
            e.validate()?;
        }
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.distance(i, j) < 1e-9 {
                    return Err(ScenarioError::CoincidentSites(i, j));
                }
            }
        }
        Ok(())
    }
}

/// Builds a hexagonal grid of `1 + 3 rings (rings + 1)` sites centred on the
/// origin. Site 0 is the centre; rings are numbered outward. Protected
/// subbands follow a three-colouring so that adjacent cells never share an
/// edge band.
pub fn build_hex_grid(
    rings: usize,
    inter_site_distance: f64,
    template: &EnbConfig,
) -> Result<NetworkLayout, ScenarioError> {
    if rings == 0 {
        return Err(ScenarioError::ZeroRings);
    }
    if !(inter_site_distance > 0.0) {
        return Err(ScenarioError::InterSiteDistance(inter_site_distance));
    }
    // Axial directions, walked in the standard ring order.
    const DIRS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

    let mut axial = vec![(0i32, 0i32)];
    for ring in 1..=rings as i32 {
        let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        for dir in DIRS {
            for _ in 0..ring {
                axial.push((q, r));
                q += dir.0;
                r += dir.1;
            }
        }
    }

    let sqrt3 = 3f64.sqrt();
    let enbs = axial
        .iter()
        .enumerate()
        .map(|(id, &(q, r))| {
            let x = inter_site_distance * (q as f64 + r as f64 / 2.0);
            let y = inter_site_distance * (r as f64 * sqrt3 / 2.0);
            EnbConfig {
                id,
                position: [x, y],
                protected_subband: (q - r).rem_euclid(SUBBANDS as i32) as usize,
                ..template.clone()
            }
        })
        .collect();

    let layout = NetworkLayout {
        enbs,
        inter_site_distance,
        cell_radius: inter_site_distance / sqrt3,
    };
    layout.validate()?;
    Ok(layout)
}

/// Log-distance pathloss with log-normal shadowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationParams {
    /// Pathloss at 1 m, dB.
    pub pathloss_intercept: f64,
    /// Pathloss slope, dB per decade of distance.
    pub pathloss_exponent_coeff: f64,
    pub shadowing_stddev: f64,
    /// Thermal noise plus receiver noise figure over one PRB, dBm.
    pub noise_dbm_per_prb: f64,
}

impl Default for PropagationParams {
    /// `128.1 + 37.6 log10(d / 1 km)` written for distances in meters, 8 dB
    /// shadowing, and -174 dBm/Hz over 180 kHz with a 9 dB noise figure.
    fn default() -> Self {
        Self {
            pathloss_intercept: 128.1 - 3.0 * 37.6,
            pathloss_exponent_coeff: 37.6,
            shadowing_stddev: 8.0,
            noise_dbm_per_prb: -174.0 + 10.0 * PRB_BANDWIDTH_HZ.log10() + 9.0,
        }
    }
}

impl PropagationParams {
    pub const MIN_DISTANCE_M: f64 = 1.0;

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.shadowing_stddev >= 0.0) || !(self.pathloss_exponent_coeff >= 0.0) {
            return Err(ScenarioError::Propagation);
        }
        Ok(())
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm_per_prb)
    }
}

/// Pathloss in dB at `distance` meters (clamped below at 1 m).
pub fn pathloss_db(distance: f64, params: &PropagationParams) -> f64 {
    let d = distance.max(PropagationParams::MIN_DISTANCE_M);
    params.pathloss_intercept + params.pathloss_exponent_coeff * d.log10()
}

pub fn received_power_dbm(tx_power_dbm: f64, distance: f64, shadowing_db: f64, params: &PropagationParams) -> f64 {
    tx_power_dbm - pathloss_db(distance, params) + shadowing_db
}

/// FTP-like traffic model: Poisson call arrivals, fixed file size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    /// Calls per second per cell.
    pub arrival_rate: f64,
    pub file_size_kbit: f64,
    pub min_prbs_per_user: usize,
    pub max_prbs_per_user: usize,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            arrival_rate: 0.55,
            file_size_kbit: 6300.0,
            min_prbs_per_user: 1,
            max_prbs_per_user: 4,
        }
    }
}

impl TrafficParams {
    pub fn file_bits(&self) -> f64 {
        self.file_size_kbit * 1e3
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.arrival_rate >= 0.0)
            || !(self.file_size_kbit > 0.0)
            || self.min_prbs_per_user == 0
            || self.min_prbs_per_user > self.max_prbs_per_user
        {
            return Err(ScenarioError::Traffic);
        }
        Ok(())
    }
}
