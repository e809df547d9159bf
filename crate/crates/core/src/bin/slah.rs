use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use slah::harness::heal::{estimate_matrix, reference_alpha};
use slah::harness::output::{self, fmt_sig, ModelRecord};
use slah::harness::seeds::{derive_seed, tags};
use slah::harness::{heal, pick_reference, run_oracle, run_sweep, sweep_grid, ExperimentConfig};
use slah::statlearn::{fit_with, Sample};
use slah::{FitError, HarnessError, HealError, ScenarioError, SimError};

/// Statistical-learning healing of the soft-frequency-reuse power ratio.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct EpisodeArgs {
    /// Episode length in seconds, warmup included.
    #[arg(long)]
    duration: Option<u64>,
    /// Seconds discarded before KPIs and interference are recorded.
    #[arg(long)]
    warmup: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write per-eNB KPIs.
    Simulate {
        /// Alpha applied to every eNB (default: the configured reference, else 0.5).
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        episode: EpisodeArgs,
    },
    /// Sweep a common alpha over all eNBs and pick the reference value.
    Sweep {
        #[arg(long)]
        alpha_min: Option<f64>,
        #[arg(long)]
        alpha_max: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        episode: EpisodeArgs,
    },
    /// Estimate the interference matrix from one long episode.
    Matrix {
        #[arg(long)]
        alpha: Option<f64>,
        /// Estimation episode length in seconds.
        #[arg(long)]
        duration: Option<u64>,
        #[arg(long)]
        warmup: Option<u64>,
    },
    /// Fit a logistic KPI model to a two-column (alpha, value) CSV.
    Fit {
        input: PathBuf,
        /// Write the model here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Keep the fixed 10% margin bounds.
        #[arg(long)]
        no_refine: bool,
    },
    /// Full healing run against the simulator.
    Heal {
        #[arg(long)]
        faulty: Option<usize>,
        #[arg(long)]
        reference_alpha: Option<f64>,
        #[command(flatten)]
        episode: EpisodeArgs,
    },
    /// Healing run against the synthetic KPI oracle.
    OracleHeal {
        /// Noise standard deviation as a fraction of each curve's range.
        #[arg(long)]
        noise: Option<f64>,
    },
}

impl EpisodeArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(d) = self.duration {
            cfg.episode.duration = d;
        }
        if let Some(w) = self.warmup {
            cfg.episode.warmup = w;
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.display().to_string();
    }
    Ok(cfg)
}

fn prepare(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.output_dir);
    output::ensure_dir(&dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).with_context(|| format!("writing {}", dir.display()))?;
    Ok(dir)
}

fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if record.len() != 2 {
            bail!(HarnessError::Config(format!("{}: line {} has {} fields, expected 2", path.display(), i + 1, record.len())));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => samples.push(Sample::new(x, y)),
            // A non-numeric first line is a header.
            _ if i == 0 => continue,
            _ => bail!(HarnessError::Config(format!("{}: line {} is not numeric", path.display(), i + 1))),
        }
    }
    Ok(samples)
}

#[derive(Serialize)]
struct OracleReport {
    seed: u64,
    noise_frac: f64,
    true_optimum: f64,
    true_optimum_feasible: bool,
    converged_alpha_s: f64,
    abs_error: f64,
    converged: bool,
    optimization_iterations: usize,
    alpha_s_history: Vec<f64>,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Simulate { alpha, episode } => {
            episode.apply(&mut cfg);
            let dir = prepare(&cfg)?;
            let sim = cfg.simulator()?;
            let a = alpha.or(cfg.icic.reference_alpha).unwrap_or(0.5);
            let alphas = vec![a; sim.layout().len()];
            let out = sim
                .run_episode(&alphas, cfg.episode.window(), derive_seed(cfg.seed, 0, tags::SIMULATE))
                .map_err(|source| HarnessError::Sim { context: "episode", source })?;
            output::write_episodes(&dir.join("episode.csv"), &[("simulate", &alphas, &out.report)])?;
            println!(
                "alpha={} mean_bcr={} mean_ftt={}",
                fmt_sig(a),
                out.report.mean_bcr().map(fmt_sig).unwrap_or_else(|| "-".into()),
                out.report.mean_ftt().map(fmt_sig).unwrap_or_else(|| "-".into())
            );
        }
        Command::Sweep { alpha_min, alpha_max, step, episode } => {
            episode.apply(&mut cfg);
            cfg.sweep.alpha_min = alpha_min.unwrap_or(cfg.sweep.alpha_min);
            cfg.sweep.alpha_max = alpha_max.unwrap_or(cfg.sweep.alpha_max);
            cfg.sweep.step = step.unwrap_or(cfg.sweep.step);
            let dir = prepare(&cfg)?;
            let sim = cfg.simulator()?;
            let s = &cfg.sweep;
            let table = run_sweep(&sim, &sweep_grid(s.alpha_min, s.alpha_max, s.step), cfg.episode.window(), cfg.seed)?;
            output::write_sweep(&dir.join("sweep.csv"), &table)?;
            let show = |v: Option<f64>| v.map(fmt_sig).unwrap_or_else(|| "-".into());
            println!("argmin_bcr={} argmin_ftt={}", show(table.argmin_bcr()), show(table.argmin_ftt()));
            println!("reference_alpha={}", fmt_sig(pick_reference(&table, cfg.icic.tolerance)?));
        }
        Command::Matrix { alpha, duration, warmup } => {
            cfg.episode.matrix_duration = duration.unwrap_or(cfg.episode.matrix_duration);
            cfg.episode.warmup = warmup.unwrap_or(cfg.episode.warmup);
            let dir = prepare(&cfg)?;
            let sim = cfg.simulator()?;
            let a = match alpha {
                Some(a) => *a,
                None => reference_alpha(&cfg, &sim)?.0,
            };
            let m = estimate_matrix(&cfg, &sim, &vec![a; sim.layout().len()])?;
            output::write_matrix(&dir.join("interference_matrix.csv"), &m)?;
            println!("alpha={} enbs={}", fmt_sig(a), m.len());
        }
        Command::Fit { input, output: dest, no_refine } => {
            let mut opts = cfg.fit_options().clone();
            if *no_refine {
                opts.refine_bounds = false;
            }
            let samples = read_samples(input)?;
            let model = fit_with(&samples, &opts)?;
            let text = toml::to_string(&ModelRecord::from(&model))?;
            match dest {
                Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Heal { faulty, reference_alpha, episode } => {
            episode.apply(&mut cfg);
            cfg.slah.faulty = faulty.or(cfg.slah.faulty);
            cfg.icic.reference_alpha = reference_alpha.or(cfg.icic.reference_alpha);
            let dir = prepare(&cfg)?;
            let run = heal(&cfg)?;
            output::write_heal_run(&dir, &run)?;
            let z = &run.zone;
            let f = z.faulty_row();
            let show = |v: Option<f64>| v.map(fmt_sig).unwrap_or_else(|| "-".into());
            println!(
                "faulty={} reference_alpha={} alpha_s={} iterations={} converged={}",
                z.faulty,
                fmt_sig(z.reference_alpha),
                fmt_sig(z.optimized_alpha_s),
                z.iterations,
                z.converged
            );
            println!(
                "faulty_bcr {} -> {}  cost {} -> {}",
                show(f.reference_bcr),
                show(f.optimized_bcr),
                show(z.reference_cost),
                show(z.optimized_cost)
            );
        }
        Command::OracleHeal { noise } => {
            cfg.oracle.noise_frac = noise.unwrap_or(cfg.oracle.noise_frac);
            let dir = prepare(&cfg)?;
            let r = run_oracle(&cfg.oracle, &cfg.slah, cfg.seed)?;
            output::write_trace(&dir, &r.state)?;
            output::emit_plot_data(&dir, &r.state.data, &r.state.alpha_s_history(), r.state.models.as_ref(), None)?;
            let history = r.state.alpha_s_history();
            let report = OracleReport {
                seed: cfg.seed,
                noise_frac: cfg.oracle.noise_frac,
                true_optimum: r.optimum.alpha_s,
                true_optimum_feasible: r.optimum.feasible,
                converged_alpha_s: r.state.current_alpha_s,
                abs_error: r.error(),
                converged: r.state.converged,
                optimization_iterations: history.len() - r.healing.init_alphas.len(),
                alpha_s_history: history,
            };
            output::write_toml(&dir.join("oracle_report.toml"), &report)?;
            println!(
                "true_optimum={} alpha_s={} error={} converged={}",
                fmt_sig(report.true_optimum),
                fmt_sig(report.converged_alpha_s),
                fmt_sig(report.abs_error),
                report.converged
            );
        }
    }
    Ok(())
}

/// Error category for the one-line failure message.
fn category(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<HarnessError>() {
            return e.category();
        }
        if cause.is::<ScenarioError>() {
            return "config";
        }
        if cause.is::<SimError>() {
            return "simulation";
        }
        if cause.is::<FitError>() {
            return "fit";
        }
        if cause.is::<HealError>() {
            return "healing";
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return "io";
        }
    }
    "internal"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{}]: {msg}", category(&e));
            ExitCode::FAILURE
        }
    }
}
