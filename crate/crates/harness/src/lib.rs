//! Experiment harness for `paritybench-core`: runs instances and sweeps,
//! persists one record per (instance, model) in an append-only JSON-lines
//! store, and turns stores into summary tables and plot-ready CSV.

pub mod export;
pub mod instance;
pub mod record;
pub mod runner;
pub mod settings;
pub mod store;
pub mod summary;
pub mod sweep;

pub use export::{export_store, import_records};
pub use instance::InstanceRecord;
pub use record::{MetricsRecord, RunRecord};
pub use runner::{run_instance, run_model};
pub use settings::{SweepSpec, TrainSettings, CONFIG_VERSION};
pub use store::Store;
pub use summary::{
    band_grid, beta_curves, kl_by_size, recovery_curves, model_summary, win_table, BandCell, BetaPoint,
    SizeRow, RecoveryPoint, ModelSummaryRow, WinRow,
};
pub use sweep::{run_sweep, SweepReport};

/// Crate version stamped into every record.
pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");
