//! Experiment harness: paired multi-trial campaigns, parameter sweeps,
//! ablations and report generation for the planners in `ipp_core`.

pub mod ablation;
pub mod campaign;
pub mod config;
pub mod output;
pub mod report;
pub mod stats;
pub mod sweep;

pub use config::{HarnessConfig, PlannerKind};
