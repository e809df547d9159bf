//! Result files. CSVs carry a header row and numbers with 9 significant
//! digits; missing KPIs are empty fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;
use crate::healer::{DataPointSet, HealingState, ZoneModels};
use crate::simulator::{InterferenceMatrix, KpiReport};
use crate::statlearn::KpiModel;

use super::heal::{HealRun, ZoneReport};
use super::sweep::SweepTable;

/// Number of alpha points per fitted curve in the plot data.
pub const CURVE_POINTS: usize = 200;

/// `x` rounded to 9 significant digits, in positional notation when
/// reasonable and scientific notation otherwise.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if !(-6..=15).contains(&exp) {
        return sci;
    }
    let rounded: f64 = sci.parse().unwrap_or(x);
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes `header` then `rows` to `path`.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), HarnessError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = toml::to_string(value).map_err(|e| HarnessError::Config(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text).map_err(io_err(path))
}

pub const EPISODE_HEADER: [&str; 8] =
    ["episode_id", "enb_id", "alpha", "arrivals", "blocks", "completions", "bcr_pct", "ftt_s"];

/// Per-eNB KPIs of one or more episodes.
pub fn write_episodes(path: &Path, episodes: &[(&str, &[f64], &KpiReport)]) -> Result<(), HarnessError> {
    let rows = episodes.iter().flat_map(|&(id, alphas, report)| {
        report.enbs.iter().map(move |e| {
            vec![
                id.to_string(),
                e.enb.to_string(),
                fmt_sig(alphas[e.enb]),
                e.arrivals.to_string(),
                e.blocks.to_string(),
                e.completions.to_string(),
                opt(e.bcr),
                opt(e.ftt),
            ]
        })
    });
    write_csv(path, &EPISODE_HEADER, rows)
}

/// Square matrix with eNB ids heading the rows and columns.
pub fn write_matrix(path: &Path, m: &InterferenceMatrix) -> Result<(), HarnessError> {
    let ids: Vec<String> = (0..m.len()).map(|j| j.to_string()).collect();
    let mut header = vec!["enb_id"];
    header.extend(ids.iter().map(String::as_str));
    let rows = (0..m.len()).map(|c| std::iter::once(c.to_string()).chain((0..m.len()).map(move |j| fmt_sig(m.get(c, j)))));
    write_csv(path, &header, rows)
}

pub fn write_sweep(path: &Path, table: &SweepTable) -> Result<(), HarnessError> {
    let rows = table.rows.iter().map(|r| vec![fmt_sig(r.alpha), opt(r.mean_bcr), opt(r.mean_ftt)]);
    write_csv(path, &["alpha", "mean_bcr", "mean_ftt"], rows)
}

/// Per-eNB data points of every iteration, plus one summary row per iteration.
pub fn write_trace(dir: &Path, state: &HealingState) -> Result<(), HarnessError> {
    let rows = state.history.iter().enumerate().flat_map(|(i, h)| {
        state.data.enbs.iter().zip(&state.data.points).map(move |(enb, pts)| {
            let p = pts[i];
            vec![h.k.to_string(), h.phase.as_str().into(), enb.to_string(), fmt_sig(p.alpha), opt(p.ftt), opt(p.bcr)]
        })
    });
    write_csv(&dir.join("trace.csv"), &["k", "phase", "enb_id", "alpha_j", "ftt_s", "bcr_pct"], rows)?;
    let summary = state.history.iter().map(|h| {
        vec![
            h.k.to_string(),
            h.phase.as_str().into(),
            fmt_sig(h.alpha_s),
            opt(h.predicted_cost),
            h.feasible.map(|f| f.to_string()).unwrap_or_default(),
        ]
    });
    write_csv(&dir.join("trace_summary.csv"), &["k", "phase", "alpha_s", "predicted_cost", "feasible"], summary)
}

/// Fitted model record, as written by the `fit` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct ModelRecord {
    pub beta0: f64,
    pub beta1: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub n_samples: usize,
    pub residual_rms: f64,
}

impl From<&KpiModel> for ModelRecord {
    fn from(m: &KpiModel) -> Self {
        Self { beta0: m.beta0, beta1: m.beta1, y_lo: m.y_lo, y_hi: m.y_hi, n_samples: m.n_samples, residual_rms: m.residual_rms }
    }
}

/// Plot-ready data for a healing run:
///
/// * `plot_points.csv`: every data point per eNB and KPI, against `alpha_s`
///   and the eNB's own alpha;
/// * `plot_curves.csv`: each fitted model sampled at [`CURVE_POINTS`] alphas;
/// * `plot_zone_bars.csv`: reference and optimized KPIs per zone eNB;
/// * `plot_descending_{bcr,ftt}.csv`: evaluation-zone KPIs sorted
///   non-increasing, reference and optimized side by side.
///
/// Missing inputs produce header-only files.
type KpiGetter = fn(&crate::healer::DataPoint) -> Option<f64>;

pub fn emit_plot_data(
    dir: &Path,
    data: &DataPointSet,
    alpha_s: &[f64],
    models: Option<&ZoneModels>,
    zone: Option<&ZoneReport>,
) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    let kpis: [(&str, KpiGetter); 2] = [("ftt", |p| p.ftt), ("bcr", |p| p.bcr)];

    let points = dir.join("plot_points.csv");
    let mut rows = Vec::new();
    for (name, get) in kpis {
        for (enb, pts) in data.enbs.iter().zip(&data.points) {
            for (i, (p, a)) in pts.iter().zip(alpha_s).enumerate() {
                if let Some(v) = get(p) {
                    rows.push(vec![(i + 1).to_string(), enb.to_string(), name.into(), fmt_sig(*a), fmt_sig(p.alpha), fmt_sig(v)]);
                }
            }
        }
    }
    write_csv(&points, &["k", "enb_id", "kpi", "alpha_s", "alpha_j", "value"], rows)?;

    let curves = dir.join("plot_curves.csv");
    let mut rows = Vec::new();
    if let Some(m) = models {
        for (name, list) in [("ftt", &m.ftt), ("bcr", &m.bcr)] {
            for (enb, model) in data.enbs.iter().zip(list) {
                for i in 1..=CURVE_POINTS {
                    let a = i as f64 / CURVE_POINTS as f64;
                    rows.push(vec![enb.to_string(), name.into(), fmt_sig(a), fmt_sig(model.predict(a))]);
                }
            }
        }
    }
    write_csv(&curves, &["enb_id", "kpi", "alpha", "predicted"], rows)?;

    let bars = dir.join("plot_zone_bars.csv");
    let mut rows = Vec::new();
    if let Some(z) = zone {
        for e in &z.enbs {
            let zone_name = if e.tier == super::heal::Tier::Second { "evaluation" } else { "optimization" };
            for (name, r, o, imp) in [
                ("bcr", e.reference_bcr, e.optimized_bcr, e.bcr_improvement_pct),
                ("ftt", e.reference_ftt, e.optimized_ftt, e.ftt_improvement_pct),
            ] {
                rows.push(vec![zone_name.into(), e.enb.to_string(), name.into(), opt(r), opt(o), opt(imp)]);
            }
        }
    }
    write_csv(&bars, &["zone", "enb_id", "kpi", "reference", "optimized", "improvement_pct"], rows)?;

    let mut written = vec![points, curves, bars];
    for name in ["bcr", "ftt"] {
        let path = dir.join(format!("plot_descending_{name}.csv"));
        let mut rows = Vec::new();
        if let Some(z) = zone {
            let pick = |reference: bool| {
                let mut v: Vec<(usize, f64)> = z
                    .enbs
                    .iter()
                    .filter_map(|e| {
                        let x = match (name, reference) {
                            ("bcr", true) => e.reference_bcr,
                            ("bcr", false) => e.optimized_bcr,
                            (_, true) => e.reference_ftt,
                            (_, false) => e.optimized_ftt,
                        };
                        x.map(|x| (e.enb, x))
                    })
                    .collect();
                v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                v
            };
            let (r, o) = (pick(true), pick(false));
            for i in 0..r.len().max(o.len()) {
                let cell = |v: &[(usize, f64)]| v.get(i).map_or((String::new(), String::new()), |&(id, x)| (id.to_string(), fmt_sig(x)));
                let ((re, rv), (oe, ov)) = (cell(&r), cell(&o));
                rows.push(vec![(i + 1).to_string(), re, rv, oe, ov]);
            }
        }
        write_csv(&path, &["rank", "reference_enb", "reference", "optimized_enb", "optimized"], rows)?;
        written.push(path);
    }
    Ok(written)
}

/// Every file of a healing run.
pub fn write_heal_run(dir: &Path, run: &HealRun) -> Result<(), HarnessError> {
    ensure_dir(dir)?;
    if let Some(t) = &run.sweep {
        write_sweep(&dir.join("sweep.csv"), t)?;
    }
    write_matrix(&dir.join("interference_matrix.csv"), &run.matrix)?;
    write_episodes(
        &dir.join("evaluation.csv"),
        &[("reference", &run.reference_alphas, &run.reference), ("optimized", &run.optimized_alphas, &run.optimized)],
    )?;
    write_trace(dir, &run.state)?;
    write_toml(&dir.join("report.toml"), &run.zone)?;
    emit_plot_data(dir, &run.state.data, &run.state.alpha_s_history(), run.state.models.as_ref(), Some(&run.zone))?;
    Ok(())
}
