use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::pipeline::{run_pipeline_indexed, RunSummary};
use crate::error::{Error, Result};
use crate::targets::{evidence_oracle, TargetSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: u64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// Moments over a set of successful runs. Quantities needing two runs (or a
/// known evidence) are `None` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean_z: Option<f64>,
    /// `σ[Ẑ]/E[Ẑ]` with the unbiased standard deviation.
    pub rel_spread: Option<f64>,
    /// `E[ΔẐ/Ẑ]`.
    pub mean_rel_sigma: Option<f64>,
    /// Fraction of runs with the true evidence inside `Ẑ ± ΔẐ`.
    pub coverage: Option<f64>,
    pub mean_perplexity: Option<f64>,
    pub mean_ess: Option<f64>,
    pub mean_k_final: Option<f64>,
    pub mean_t_final: Option<f64>,
    pub converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub n_runs: usize,
    pub n_failed: usize,
    pub z_true: Option<f64>,
    #[serde(flatten)]
    pub all: Aggregate,
    /// Heavy-tail target only: fraction of runs that located all four modes,
    /// and the moments restricted to those runs.
    pub all_modes_fraction: Option<f64>,
    pub all_modes: Option<Aggregate>,
    pub runs: Vec<RunRecord>,
}

/// Order-independent mean: values are sorted before summation.
fn sorted_mean(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

pub fn aggregate(runs: &[&RunSummary], z_true: Option<f64>) -> Aggregate {
    let col = |f: fn(&RunSummary) -> f64| sorted_mean(runs.iter().map(|r| f(r)).collect());
    let mean_z = col(|r| r.z_hat);
    let rel_spread = match mean_z {
        Some(m) if runs.len() >= 2 => {
            let mut dev: Vec<f64> = runs.iter().map(|r| (r.z_hat - m).powi(2)).collect();
            dev.sort_by(f64::total_cmp);
            let var = dev.iter().sum::<f64>() / (runs.len() - 1) as f64;
            Some(var.sqrt() / m)
        }
        _ => None,
    };
    let coverage = z_true.filter(|_| !runs.is_empty()).map(|z| {
        runs.iter().filter(|r| (r.z_hat - z).abs() <= r.z_sigma).count() as f64 / runs.len() as f64
    });
    Aggregate {
        n: runs.len(),
        mean_z,
        rel_spread,
        mean_rel_sigma: col(|r| r.z_sigma / r.z_hat),
        coverage,
        mean_perplexity: col(|r| r.perplexity),
        mean_ess: col(|r| r.ess),
        mean_k_final: col(|r| r.k_final as f64),
        mean_t_final: col(|r| r.t_final as f64),
        converged: runs.iter().filter(|r| r.converged).count(),
    }
}

/// Summarize run records; the result does not depend on record order except
/// for the order of `runs`, which is by run index.
pub fn summarize(target: &TargetSpec, mut records: Vec<RunRecord>) -> StudySummary {
    records.sort_by_key(|r| r.run);
    let z_true = evidence_oracle(target).ok();
    let ok: Vec<&RunSummary> = records.iter().filter_map(|r| r.summary.as_ref()).collect();
    let tails = matches!(target, TargetSpec::Tails { .. });
    let (all_modes_fraction, all_modes) = if tails {
        let found: Vec<&RunSummary> = ok.iter().copied().filter(|r| r.modes_found == Some(4)).collect();
        let frac = (!ok.is_empty()).then(|| found.len() as f64 / ok.len() as f64);
        (frac, Some(aggregate(&found, z_true)))
    } else {
        (None, None)
    };
    StudySummary {
        n_runs: records.len(),
        n_failed: records.len() - ok.len(),
        z_true,
        all: aggregate(&ok, z_true),
        all_modes_fraction,
        all_modes,
        runs: records,
    }
}

/// Run `n_runs` independent pipelines in parallel, run `r` seeded by
/// `(config.seed, r)`. Per-run artifacts go to `<output>/run_<r>` when an
/// output directory is configured.
pub fn repeat_study(config: &RunConfig, n_runs: usize) -> Result<StudySummary> {
    if n_runs == 0 {
        return Err(Error::BadParams("a study needs at least one run".into()));
    }
    config.validate()?;
    let records: Vec<RunRecord> = (0..n_runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut cfg = config.clone();
            cfg.output = config.output.as_ref().map(|d| d.join(format!("run_{run}")));
            match run_pipeline_indexed(&cfg, run) {
                Ok(a) => RunRecord {
                    run,
                    summary: Some(a.summary),
                    error: None,
                },
                Err(e) => RunRecord {
                    run,
                    summary: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(summarize(&config.target, records))
}

impl StudySummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
