//! Experiment configs, persisted runs, regime comparisons, table
//! reproduction and error-grid export.

mod config;
mod grid;
mod report;
mod run;
mod tables;

pub use config::{sampling_seeds, ExperimentConfig, NetworkConfig, ProblemConfig};
pub use grid::{error_grid, export_error_grid, grid_csv, GridRow, GridSpec, GRID_CSV_HEADER};
pub use report::{compare, median, Published, RegimeRow, Report, ReportGroup, SeedResult};
pub use run::{config_hash, execute, persist, run, run_one, RunOutcome, RunSummary};
pub use tables::{plan, reproduce, table, Cell, ReproduceOptions, TableSpec, AC_SWEEP_EPOCHS, AC_SWEEP_NET, TABLE_IDS};
