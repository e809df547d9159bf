//! Network-wide alpha sweep, reference selection and faulty-cell selection.

use rayon::prelude::*;

use crate::error::HarnessError;
use crate::simulator::{EpisodeWindow, KpiReport, Simulator};

use super::seeds::{derive_seed, tags};

/// Grid points `k * step` inside `[alpha_min, alpha_max]`. When `step`
/// divides 1 the points are computed as `k / n`, matching the healing grid
/// bit for bit.
pub fn sweep_grid(alpha_min: f64, alpha_max: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || alpha_min > alpha_max {
        return Vec::new();
    }
    let eps = 1e-9;
    let first = ((alpha_min / step) - eps).ceil().max(1.0) as u64;
    let last = ((alpha_max / step) + eps).floor() as u64;
    let n = (1.0 / step).round();
    let divides = n >= 1.0 && (n * step - 1.0).abs() <= eps;
    (first..=last).map(|k| if divides { k as f64 / n } else { k as f64 * step }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub mean_bcr: Option<f64>,
    pub mean_ftt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Alpha minimizing mean BCR; ties go to the smaller alpha.
    pub fn argmin_bcr(&self) -> Option<f64> {
        argmin(&self.rows, |r| r.mean_bcr)
    }

    pub fn argmin_ftt(&self) -> Option<f64> {
        argmin(&self.rows, |r| r.mean_ftt)
    }
}

fn argmin(rows: &[SweepRow], kpi: fn(&SweepRow) -> Option<f64>) -> Option<f64> {
    rows.iter()
        .filter_map(|r| kpi(r).map(|v| (r.alpha, v)))
        .fold(None, |best: Option<(f64, f64)>, (a, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((a, v)),
        })
        .map(|(a, _)| a)
}

/// Runs one episode per alpha with that alpha on every eNB. All episodes
/// share the same seed, so KPI differences come from alpha alone.
pub fn run_sweep(sim: &Simulator, alphas: &[f64], window: EpisodeWindow, root_seed: u64) -> Result<SweepTable, HarnessError> {
    let seed = derive_seed(root_seed, 0, tags::SWEEP);
    let n = sim.layout().len();
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let out = sim
                .run_episode(&vec![alpha; n], window, seed)
                .map_err(|source| HarnessError::Sim { context: "sweep episode", source })?;
            Ok(SweepRow { alpha, mean_bcr: out.report.mean_bcr(), mean_ftt: out.report.mean_ftt() })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(SweepTable { rows })
}

/// Smallest alpha whose mean BCR and mean FTT both lie within
/// `(1 + tolerance)` of their minima. An empty band is retried once with
/// the tolerance doubled.
pub fn pick_reference(table: &SweepTable, tolerance: f64) -> Result<f64, HarnessError> {
    let rows: Vec<(f64, f64, f64)> =
        table.rows.iter().filter_map(|r| Some((r.alpha, r.mean_bcr?, r.mean_ftt?))).collect();
    if rows.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    let min_bcr = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let min_ftt = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let within = |tol: f64| {
        rows.iter()
            .filter(|r| r.1 <= min_bcr * (1.0 + tol) && r.2 <= min_ftt * (1.0 + tol))
            .map(|r| r.0)
            .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))))
    };
    within(tolerance).or_else(|| within(2.0 * tolerance)).ok_or(HarnessError::EmptyFeasible)
}

/// Competition ranks of `values` in descending order (rank 1 = largest).
/// Missing values rank after every present one.
fn descending_ranks(values: &[Option<f64>]) -> Vec<usize> {
    values
        .iter()
        .map(|v| match v {
            Some(x) => 1 + values.iter().filter(|o| matches!(o, Some(y) if y > x)).count(),
            None => 1 + values.iter().filter(|o| o.is_some()).count(),
        })
        .collect()
}

/// Worst-performing eNB among `candidates`: the smallest sum of its
/// descending BCR rank and descending FTT rank, ties to the smallest id.
/// Ranks are computed within the candidate set.
pub fn select_faulty(report: &KpiReport, candidates: &[usize]) -> Option<usize> {
    let kpis: Vec<_> = candidates.iter().filter_map(|&id| report.enbs.iter().find(|e| e.enb == id)).collect();
    let bcr = descending_ranks(&kpis.iter().map(|e| e.bcr).collect::<Vec<_>>());
    let ftt = descending_ranks(&kpis.iter().map(|e| e.ftt).collect::<Vec<_>>());
    kpis.iter().zip(bcr.iter().zip(&ftt)).map(|(e, (b, f))| (b + f, e.enb)).min().map(|(_, id)| id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::EnbKpi;

    fn row(alpha: f64, bcr: f64, ftt: f64) -> SweepRow {
        SweepRow { alpha, mean_bcr: Some(bcr), mean_ftt: Some(ftt) }
    }

    fn report(kpis: &[(Option<f64>, Option<f64>)]) -> KpiReport {
        KpiReport {
            enbs: kpis
                .iter()
                .enumerate()
                .map(|(enb, &(bcr, ftt))| EnbKpi { enb, arrivals: 0, blocks: 0, completions: 0, bcr, ftt })
                .collect(),
        }
    }

    #[test]
    fn grid_counts() {
        let g = sweep_grid(0.0125, 1.0, 0.0125);
        assert_eq!(g.len(), 80);
        assert!((g[79] - 1.0).abs() < 1e-12);
        assert_eq!(sweep_grid(0.25, 1.0, 0.25), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sweep_grid(0.0, 1.0, 0.25), vec![0.25, 0.5, 0.75, 1.0]);
        assert!(sweep_grid(0.5, 0.4, 0.1).is_empty());
    }

    #[test]
    fn reference_flat_curves() {
        let t = SweepTable { rows: (1..=8).map(|k| row(k as f64 * 0.125, 3.0, 7.0)).collect() };
        assert_eq!(pick_reference(&t, 0.02).unwrap(), 0.125);
    }

    #[test]
    fn reference_plateau() {
        // Both KPIs flat on [0.5, 0.7], rising outside.
        let rows = (1..=10)
            .map(|k| {
                let a = k as f64 * 0.1;
                let d = if a < 0.5 - 1e-9 { 0.5 - a } else if a > 0.7 + 1e-9 { a - 0.7 } else { 0.0 };
                row(a, 2.0 + 10.0 * d, 9.0 + 20.0 * d)
            })
            .collect();
        assert!((pick_reference(&SweepTable { rows }, 0.02).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reference_u_shape() {
        let rows: Vec<_> = sweep_grid(0.0125, 1.0, 0.0125)
            .into_iter()
            .map(|a| row(a, 2.0 + 40.0 * (a - 0.625).powi(2), 8.0 + 30.0 * (a - 0.625).powi(2)))
            .collect();
        let t = SweepTable { rows };
        // Band edges: 40 d^2 <= 0.04 and 30 d^2 <= 0.16, so |d| <= 0.0316.
        let expected = t
            .rows
            .iter()
            .filter(|r| 40.0 * (r.alpha - 0.625).powi(2) <= 0.04 && 30.0 * (r.alpha - 0.625).powi(2) <= 0.16)
            .map(|r| r.alpha)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(pick_reference(&t, 0.02).unwrap(), expected);
        assert!((expected - 0.6).abs() < 1e-12);
        assert_eq!(t.argmin_bcr(), Some(0.625));
    }

    #[test]
    fn reference_widens_then_fails() {
        // BCR minimum at 0.1, FTT minimum at 0.9: disjoint bands.
        let t = SweepTable { rows: vec![row(0.1, 1.0, 20.0), row(0.5, 1.5, 15.0), row(0.9, 2.0, 10.0)] };
        assert!(matches!(pick_reference(&t, 0.02), Err(HarnessError::EmptyFeasible)));
        // Empty at 10%, the doubled 20% band admits 0.1.
        let t = SweepTable { rows: vec![row(0.1, 1.0, 11.5), row(0.9, 1.15, 10.0)] };
        assert_eq!(pick_reference(&t, 0.1).unwrap(), 0.1);
        assert!(matches!(pick_reference(&SweepTable { rows: vec![] }, 0.02), Err(HarnessError::EmptySweep)));
    }

    #[test]
    fn faulty_dominant() {
        let r = report(&[(Some(1.0), Some(5.0)), (Some(9.0), Some(12.0)), (Some(3.0), Some(6.0))]);
        assert_eq!(select_faulty(&r, &[0, 1, 2]), Some(1));
    }

    #[test]
    fn faulty_rank_tie_goes_to_smaller_id() {
        // eNB 0: BCR rank 1, FTT rank 3. eNB 1: rank 2 in both. Sums 4 and 4.
        let r = report(&[(Some(9.0), Some(5.0)), (Some(8.0), Some(7.0)), (Some(1.0), Some(9.0))]);
        assert_eq!(select_faulty(&r, &[0, 1, 2]), Some(0));
        let r = report(&[(Some(8.0), Some(7.0)), (Some(9.0), Some(5.0)), (Some(1.0), Some(9.0))]);
        assert_eq!(select_faulty(&r, &[0, 1, 2]), Some(0));
    }

    #[test]
    fn faulty_full_tie_and_missing() {
        let r = report(&[(Some(2.0), Some(2.0)); 4]);
        assert_eq!(select_faulty(&r, &[3, 1, 2]), Some(1));
        let r = report(&[(None, None), (Some(1.0), Some(1.0))]);
        assert_eq!(select_faulty(&r, &[0, 1]), Some(1));
        assert_eq!(select_faulty(&r, &[]), None);
    }

    #[test]
    fn competition_ranks() {
        assert_eq!(descending_ranks(&[Some(3.0), Some(5.0), Some(3.0), None]), vec![2, 1, 2, 4]);
    }
}
