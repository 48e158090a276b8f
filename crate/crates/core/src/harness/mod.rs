//! Experiment configuration, twin runs, audits, fits and output files.

pub mod audit;
pub mod config;
pub mod fit;
pub mod output;
pub mod twin;

pub use audit::{envelope_from_initial, verify_envelopes, CheckCount, EnvelopeAudit};
pub use config::{
    parse_config, parse_config_str, parse_override, ExperimentConfig, InitSpec, ObserverInit,
    TruthInit,
};
pub use fit::{fit_geometric, fit_sync_decay, log_linear_fit, GeometricFit, SyncFit};
pub use output::{
    read_iterations_csv, read_sync_csv, render_plots, write_iterations_csv, write_json, write_run,
    write_sync_csv, IterationRow, RunArtifacts,
};
pub use twin::{
    first_window_conditions, run_assimilation, run_recovery_from_dump, run_twin_experiment,
    truth_pass, truth_setup, AssimilationReport, AssimilationSpec, RunReport, SyncPoint, TruthPass,
    TruthSetup,
};
