//! Configuration-driven experiment runner.
//!
//! A run reads a TOML configuration (or the manifest of an earlier run),
//! executes it, and writes CSV outputs, `summary.csv` and `manifest.json`
//! into one directory.

pub mod config;
pub mod manifest;
pub mod run;

pub use config::{env_seed, Config, ConfigError, Kind};
pub use manifest::{
    compare_outputs, load_source, output_dir, prepare_source, run_prepared, verify_rerun, Manifest, RunResult, Source,
};
pub use run::{aw_between, aw_csv, execute, load_value_fn, RunOutput};

/// Exit status of a run: 0 when every cell is ok, 2 otherwise.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
