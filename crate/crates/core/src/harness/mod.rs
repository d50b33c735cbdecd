//! End-to-end orchestration: configuration, single runs with artifact
//! output, repetition studies and marginal histograms.

mod config;
mod marginal;
mod pipeline;
mod study;

pub use config::{ClusteringConfig, McmcConfig, PatchingConfig, PmcConfig, ProposalKind, RunConfig};
pub use marginal::{emit_marginal, Histogram};
pub use pipeline::{
    count_modes_found, evidence_oracle, run_pipeline, run_pipeline_indexed, write_artifacts, RunArtifacts,
    RunSummary,
};
pub use study::{aggregate, repeat_study, summarize, Aggregate, RunRecord, StudySummary};
