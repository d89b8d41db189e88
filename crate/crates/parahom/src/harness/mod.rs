//! Experiment configuration, orchestration and persistence.

mod config;
mod run;

pub use config::{
    BaseOperator, DataConfig, DataTerm, ExperimentConfig, GridsConfig, OperatorConfig, OutputConfig, PipelineConfig,
    PipelineKind, RecessionConfig, TableConfig,
};
pub use run::{
    assemble, render_report, run, sha256_hex, validate, Artifact, CostRow, CouplingReport, LayerReport, PhaseTime,
    RunManifest, ValidationReport, PUCCI_GAP_MIN, PUCCI_KINK_TOL, PUCCI_POSITIVE_TOL,
};

#[cfg(test)]
mod tests;
