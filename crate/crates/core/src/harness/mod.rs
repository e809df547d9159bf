//! Experiment orchestration: configuration, seeds, sweeps, full healing
//! runs, the synthetic oracle and result files.

pub mod config;
pub mod heal;
pub mod oracle;
pub mod output;
pub mod seeds;
pub mod sweep;

pub use config::ExperimentConfig;
pub use heal::{heal, HealRun, ZoneReport};
pub use oracle::{run_oracle, OracleConfig, OracleRun, SyntheticZone};
pub use seeds::derive_seed;
pub use sweep::{pick_reference, run_sweep, select_faulty, sweep_grid, SweepRow, SweepTable};
