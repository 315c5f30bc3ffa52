//! Config-driven experiments: data loading, training runs, diagnostics output and sweeps.

mod checkpoint;
mod config;
mod dataset;
mod idx;
mod run;
mod sweep;

pub use checkpoint::{read_checkpoint, sidecar_path, write_checkpoint};
pub use config::{
    load_config, train_len, DatasetSpec, DiagnosticsConfig, ModelConfig, OptimizerConfig,
    RunConfig, SliceRequest,
};
pub use dataset::{gaussian_blobs, load_csv, load_dataset, load_idx, train_test_split, two_moons};
pub use idx::{encode_idx, parse_idx, read_idx, write_idx, IdxArray};
pub use run::{
    derive_seed, run, write_metrics, write_report, write_slice, Experiment, RunOptions, RunSummary,
};
pub use sweep::{cell_seed, sweep, sweep_configs, write_summary, SweepCell};
