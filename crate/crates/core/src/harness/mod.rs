//! Seeded multi-run experiments, aggregation, CSV output and sweeps.

pub mod aggregate;
mod config;
mod csv;
mod run;
mod sweep;

pub use config::{parse_real, parse_seeds, EnvKind, ExperimentConfig, ModelKind};
pub use csv::{csv_string, write_csv, BETA_HEADER, CSV_HEADER};
pub use run::{
    beta_groups, run_experiment, run_seed, seed_streams, BetaGroups, DivergenceRecord, EpisodeRow, LearningCurve,
    RunOutput,
};
pub use sweep::{
    best_mu, config_hash, powers_of_two, preset, sweep, write_sweep, Preset, SweepCell, SweepGrid, DRIFTING_EPISODES,
    MANIFEST_HEADER, PRESET_NAMES,
};
