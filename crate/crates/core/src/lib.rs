//! Adaptive importance sampling for multimodal posteriors.
//!
//! A pipeline of adaptive Metropolis chains, chain patching, hierarchical
//! clustering of Gaussian mixtures and Population Monte Carlo, ending in an
//! evidence estimate with a standard error.

pub mod densities;
pub mod error;
pub mod harness;
pub mod hclust;
pub mod mcmc;
pub mod patching;
pub mod pmc;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod targets;

pub use densities::{CovarianceFactor, Kind, MixtureComponent, MixtureDensity};
pub use error::{Error, Result};
pub use hclust::{cluster, ClusterOutcome};
pub use mcmc::{Adaptation, Chain};
pub use pmc::{run_pmc, EvidenceEstimate, PmcDiagnostics, PmcSettings, WeightedSampleSet};
pub use targets::{make_target, Target, TargetDensity, TargetSpec};
pub use harness::{repeat_study, run_pipeline, RunConfig, RunSummary, StudySummary};
