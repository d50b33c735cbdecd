use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{ProposalKind, RunConfig};
use crate::densities::MixtureDensity;
use crate::error::{Error, Result};
use crate::hclust::{cluster, ClusterOutcome};
use crate::mcmc::{run_prerun, Chain};
use crate::patching::{
    build_patch_mixture, discard_burn_in, group_chains, long_patch_init, make_patches, PatchReport, PatchSet,
};
use crate::pmc::{clone_to_student, run_pmc, total_calls, PmcOutcome};
use crate::rng::{self, stage};
use crate::targets::{make_target, CountingTarget, Target, TargetSpec, HEAVYTAIL_MODES};

/// Per-run quantities. `wall_time` is kept out of the JSON so that equal
/// seeds give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub z_hat: f64,
    pub z_sigma: f64,
    /// Analytic evidence of built-in targets.
    pub z_true: Option<f64>,
    pub perplexity: f64,
    pub ess: f64,
    pub groups: usize,
    /// Live components after clustering.
    pub k_initial: usize,
    pub k_final: usize,
    pub t_final: usize,
    pub converged: bool,
    /// Target evaluations counted during the run.
    pub n_total: u64,
    pub modes_found: Option<usize>,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Everything a run produced, for callers that want more than the summary.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub chains: Vec<Chain>,
    pub patches: Vec<PatchSet>,
    pub patch_report: PatchReport,
    pub q0_hc: MixtureDensity,
    pub clustering: ClusterOutcome,
    pub pmc: PmcOutcome,
}

/// Number of the four heavy-tail modes that some live component mean lies
/// within distance 3 of, measured in the first two coordinates.
pub fn count_modes_found(q: &MixtureDensity) -> usize {
    HEAVYTAIL_MODES
        .iter()
        .filter(|m| {
            q.live().any(|(_, _, c)| {
                let mu = c.mean();
                mu.len() >= 2 && ((mu[0] - m[0]).powi(2) + (mu[1] - m[1]).powi(2)).sqrt() <= 3.0
            })
        })
        .count()
}

/// Prerun, patching, clustering and PMC for run `run` of a configuration.
/// Random streams derive from `(seed, run, stage)`.
pub fn run_pipeline_indexed(config: &RunConfig, run: u64) -> Result<RunArtifacts> {
    config.validate()?;
    let started = Instant::now();
    let target = make_target(&config.target).map_err(|e| e.at("target"))?;
    let counting = CountingTarget::new(&target);
    let dim = config.target.dim();

    let chains = run_prerun(
        &counting,
        config.mcmc.chains,
        config.mcmc.samples,
        config.mcmc.update_interval,
        rng::derive_seed(config.seed, &[run, stage::MCMC]),
        None,
    )
    .map_err(|e| e.at("mcmc"))?;
    let n_mcmc = chains.first().map_or(0, Chain::len);

    let p = &config.patching;
    let slices: Vec<_> = chains.iter().map(|c| discard_burn_in(c, p.burn_in)).collect();
    let groups = group_chains(&slices, p.r_critical, &p.group_dims);
    let q0_hc = long_patch_init(&groups, &slices, p.components_per_group).map_err(|e| e.at("long patches"))?;
    let patches: Vec<PatchSet> = slices
        .iter()
        .enumerate()
        .map(|(i, s)| make_patches(s, p.patch_length, i))
        .collect();
    let patch_report = PatchReport::new(&groups, &patches);
    let q_in = build_patch_mixture(&patches).map_err(|e| e.at("patching"))?;

    let clustering = cluster(&q_in, &q0_hc, config.clustering.eps_min, config.clustering.max_iter)
        .map_err(|e| e.at("clustering"))?;
    let reset = clustering.mixture.without_dead().with_equal_weights();
    let q0_pmc = match (config.pmc.proposal, config.pmc.nu) {
        (ProposalKind::StudentT, Some(nu)) => clone_to_student(&reset, nu)?,
        _ => reset,
    };
    debug_assert_eq!(q0_pmc.dim(), dim);

    let settings = config.pmc.settings();
    let mut pmc_rng = rng::stream(config.seed, &[run, stage::PMC]);
    let pmc = match run_pmc(&counting, &q0_pmc, &settings, &mut pmc_rng) {
        Ok(out) => out,
        Err(e) => {
            if let (Some(dir), Error::PmcFailed { last_proposal, .. }) = (&config.output, &e) {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("q_last.json"), last_proposal.to_json())?;
            }
            return Err(e.at("pmc"));
        }
    };

    let n_total = counting.calls();
    debug_assert_eq!(
        n_total,
        total_calls(
            chains.len(),
            n_mcmc,
            pmc.diagnostics.t_final,
            q0_pmc.live_count(),
            settings.samples_per_component,
            settings.final_samples
        )
    );
    let final_weights = &pmc.samples.weights;
    let summary = RunSummary {
        z_hat: pmc.evidence.z_hat,
        z_sigma: pmc.evidence.sigma(),
        z_true: target.evidence(),
        perplexity: crate::pmc::perplexity(final_weights).unwrap_or(0.0),
        ess: crate::pmc::ess(final_weights).unwrap_or(0.0),
        groups: groups.len(),
        k_initial: q0_pmc.live_count(),
        k_final: pmc.proposal.live_count(),
        t_final: pmc.diagnostics.t_final,
        converged: pmc.diagnostics.converged,
        n_total,
        modes_found: target.is_tails().then(|| count_modes_found(&pmc.proposal)),
        wall_time: started.elapsed().as_secs_f64(),
    };
    let artifacts = RunArtifacts {
        summary,
        chains,
        patches,
        patch_report,
        q0_hc,
        clustering,
        pmc,
    };
    if let Some(dir) = &config.output {
        write_artifacts(&artifacts, dir)?;
    }
    Ok(artifacts)
}

/// Single run with run index 0.
pub fn run_pipeline(config: &RunConfig) -> Result<RunArtifacts> {
    run_pipeline_indexed(config, 0)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Serialize)]
struct DiagnosticsJson<'a> {
    #[serde(flatten)]
    history: &'a crate::pmc::PmcDiagnostics,
    z_hat: f64,
    z_sigma: f64,
    n_total: u64,
}

/// Writes chain dumps, the three proposal mixtures, the final samples,
/// diagnostics, the patch report, the clustering trace and the summary.
pub fn write_artifacts(a: &RunArtifacts, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, c) in a.chains.iter().enumerate() {
        c.write_csv(create(&dir.join(format!("chain_{i}.csv")))?)?;
    }
    fs::write(dir.join("q0_hc.json"), a.q0_hc.to_json())?;
    fs::write(dir.join("q_hc.json"), a.clustering.mixture.to_json())?;
    fs::write(dir.join("q_final.json"), a.pmc.proposal.to_json())?;
    a.pmc.samples.write_csv(create(&dir.join("samples.csv"))?)?;
    a.clustering.write_trace_csv(create(&dir.join("hclust_trace.csv"))?)?;
    let diag = DiagnosticsJson {
        history: &a.pmc.diagnostics,
        z_hat: a.summary.z_hat,
        z_sigma: a.summary.z_sigma,
        n_total: a.summary.n_total,
    };
    fs::write(dir.join("diagnostics.json"), serde_json::to_string_pretty(&diag)?)?;
    fs::write(dir.join("patches.json"), serde_json::to_string_pretty(&a.patch_report)?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&a.summary)?)?;
    fs::write(
        dir.join("timing.json"),
        serde_json::to_string_pretty(&serde_json::json!({ "wall_time": a.summary.wall_time }))?,
    )?;
    Ok(())
}

/// Analytic evidence of a built-in target.
pub fn evidence_oracle(spec: &TargetSpec) -> Result<f64> {
    crate::targets::evidence_oracle(spec)
}
