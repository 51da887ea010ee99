//! Experiment configs, end-to-end runs and report verification.
//!
//! A run validates its [`ExperimentConfig`], executes each experiment in
//! config order and collects an [`OperationResult`] per experiment together
//! with every certificate needed to re-check its claims. [`verify_report`]
//! re-evaluates those certificates from their stored witnesses only.

mod config;
mod report;
mod run;

pub use config::{
    preset, ChainParams, DistancePair, Experiment, ExperimentConfig, PackingParams, SpaceSpec, PRESET_NAMES,
};
pub use report::{
    verify_report, verify_report_path, verify_report_value, Check, CertificateRecord, ExPair, OperationResult, Report,
    Timing, Verification, MAP_RECHECK_TOL, REPORT_FORMAT,
};
pub use run::{default_out_dir, run_experiment, write_outputs, RunOutcome, Table, OUT_DIR_ENV};
