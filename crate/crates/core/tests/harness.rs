//! End-to-end checks of the experiment harness and the files it writes.

use std::collections::BTreeMap;
use std::path::Path;

use slah::harness::heal::improvement_pct;
use slah::harness::{heal, output, ExperimentConfig};

fn quick_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
    cfg.episode.duration = 200;
    cfg.episode.warmup = 50;
    cfg.episode.matrix_duration = 600;
    cfg.sweep.step = 0.05;
    cfg.slah.max_iterations = 12;
    cfg
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn heal_outputs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let run = heal(&quick_config(3)).unwrap();
        output::write_heal_run(dir, &run).unwrap();
    }
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    assert!(fa.contains_key("report.toml") && fa.contains_key("evaluation.csv") && fa.contains_key("trace.csv"));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between runs");
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-7 * (1.0 + a.abs().max(b.abs()))
}

/// Improvements in the report can be recomputed from evaluation.csv.
#[test]
fn report_agrees_with_evaluation_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = heal(&quick_config(5)).unwrap();
    output::write_heal_run(dir.path(), &run).unwrap();

    let mut csv = csv::Reader::from_path(dir.path().join("evaluation.csv")).unwrap();
    let header: Vec<String> = csv.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, output::EPISODE_HEADER);
    let mut kpis: BTreeMap<(String, usize), (Option<f64>, Option<f64>)> = BTreeMap::new();
    for record in csv.records() {
        let r = record.unwrap();
        let value = |i: usize| r[i].parse::<f64>().ok();
        let (arrivals, blocks): (u64, u64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        if let Some(bcr) = value(6) {
            assert!(close(bcr, 100.0 * blocks as f64 / arrivals as f64));
        }
        kpis.insert((r[0].to_string(), r[1].parse().unwrap()), (value(6), value(7)));
    }
    let n = run.reference.enbs.len();
    assert_eq!(kpis.len(), 2 * n);

    let report: toml::Value = toml::from_str(&std::fs::read_to_string(dir.path().join("report.toml")).unwrap()).unwrap();
    let enbs = report["enbs"].as_array().unwrap();
    assert_eq!(enbs.len(), 1 + run.zone.ns1.len() + run.zone.ns2.len());
    let field = |t: &toml::Value, k: &str| t.get(k).and_then(toml::Value::as_float);
    for e in enbs {
        let id = e["enb"].as_integer().unwrap() as usize;
        let (rb, rf) = kpis[&("reference".to_string(), id)];
        let (ob, of) = kpis[&("optimized".to_string(), id)];
        for (csv_value, key) in [(rb, "reference_bcr"), (ob, "optimized_bcr"), (rf, "reference_ftt"), (of, "optimized_ftt")] {
            match (csv_value, field(e, key)) {
                (Some(a), Some(b)) => assert!(close(a, b), "eNB {id} {key}: {a} vs {b}"),
                (None, None) => {}
                other => panic!("eNB {id} {key}: {other:?}"),
            }
        }
        for (r, o, key) in [(rb, ob, "bcr_improvement_pct"), (rf, of, "ftt_improvement_pct")] {
            match (improvement_pct(r, o), field(e, key)) {
                (Some(a), Some(b)) => assert!(close(a, b), "eNB {id} {key}: {a} vs {b}"),
                (None, None) => {}
                other => panic!("eNB {id} {key}: {other:?}"),
            }
        }
    }
    let (rc, oc) = (field(&report, "reference_cost"), field(&report, "optimized_cost"));
    if let (Some(a), Some(b)) = (improvement_pct(rc, oc), field(&report, "cost_improvement_pct")) {
        assert!(close(a, b));
    }
    let faulty = report["faulty"].as_integer().unwrap() as usize;
    assert_eq!(faulty, run.zone.faulty);
    assert!(report["ns1"].as_array().unwrap().iter().all(|v| v.as_integer().unwrap() as usize != faulty));
}

#[test]
fn trace_rows_follow_the_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let run = heal(&quick_config(2)).unwrap();
    output::write_heal_run(dir.path(), &run).unwrap();
    let mut summary = csv::Reader::from_path(dir.path().join("trace_summary.csv")).unwrap();
    assert_eq!(summary.records().count(), run.state.history.len());
    let sweep = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap().into_records().count();
    assert_eq!(sweep, 20);
}
