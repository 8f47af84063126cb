//! Config-driven experiment runner for `mpsim-core`.
//!
//! A run is described by a flat JSON [`RunConfig`]. [`run`] writes a trace
//! CSV (`t, S_center, S_bond_avg, sz_site_*, trace | jumps_cum, S_bond_*`),
//! a fit report, a manifest that embeds the config, and engine-specific
//! extras (ensemble statistics, per-trajectory traces, an MPDO checkpoint).

pub mod analysis;
pub mod config;
pub mod error;
pub mod runner;
pub mod table;

pub use analysis::{compare_files, compare_tables, convergence_scan, fit_table, plateau, FitKind, ScanAxis};
pub use config::{Engine, RunConfig};
pub use error::{CliError, Result};
pub use runner::{resolve_output_dir, run, run_with_threads, RunOutput};
pub use table::Table;
