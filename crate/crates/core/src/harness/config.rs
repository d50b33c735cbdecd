use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmc::PmcSettings;
use crate::targets::TargetSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    /// Number of chains `k`.
    pub chains: usize,
    /// Samples per chain, including the starting point.
    pub samples: usize,
    /// Adaptation batch length.
    pub update_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchingConfig {
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    pub patch_length: usize,
    #[serde(default = "default_r_critical")]
    pub r_critical: f64,
    /// Parameter indices (0-based) checked when grouping chains; empty means all.
    #[serde(default)]
    pub group_dims: Vec<usize>,
    /// Long-patch components per chain group.
    pub components_per_group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    #[serde(default = "default_eps_min")]
    pub eps_min: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            eps_min: default_eps_min(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Gaussian,
    StudentT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmcConfig {
    #[serde(default = "default_proposal")]
    pub proposal: ProposalKind,
    #[serde(default)]
    pub nu: Option<f64>,
    pub samples_per_component: usize,
    pub final_samples: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_t_min")]
    pub t_min: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_prune")]
    pub prune_threshold: f64,
}

impl PmcConfig {
    pub fn settings(&self) -> PmcSettings {
        PmcSettings {
            samples_per_component: self.samples_per_component,
            final_samples: self.final_samples,
            eps: self.eps,
            t_min: self.t_min,
            t_max: self.t_max,
            prune_threshold: self.prune_threshold,
        }
    }
}

/// Every tunable of a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Artifacts are written here when set.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub target: TargetSpec,
    pub mcmc: McmcConfig,
    pub patching: PatchingConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    pub pmc: PmcConfig,
}

fn default_burn_in() -> f64 {
    0.2
}
fn default_r_critical() -> f64 {
    1.2
}
fn default_eps_min() -> f64 {
    1e-4
}
fn default_max_iter() -> usize {
    1000
}
fn default_proposal() -> ProposalKind {
    ProposalKind::Gaussian
}
fn default_eps() -> f64 {
    0.05
}
fn default_t_min() -> usize {
    1
}
fn default_t_max() -> usize {
    20
}
fn default_prune() -> f64 {
    20.0
}

/// Per-dimension settings of the benchmark runs: `(k, N_MCMC, L, K_g, N_c, N_final)`.
fn benchmark_row(shells: bool, dim: usize) -> Option<(usize, usize, usize, usize, usize, usize)> {
    Some(match (shells, dim) {
        (true, 2) => (8, 10_000, 100, 15, 200, 5_200),
        (true, 10) => (8, 20_000, 100, 15, 400, 18_000),
        (true, 20) => (8, 20_000, 200, 25, 600, 40_000),
        (false, 2) => (20, 10_000, 100, 5, 200, 6_700),
        (false, 10) => (20, 20_000, 100, 15, 400, 30_000),
        (false, 20) => (20, 20_000, 200, 25, 600, 54_000),
        _ => return None,
    })
}

impl RunConfig {
    fn benchmark(target: TargetSpec) -> Result<Self> {
        let dim = target.dim();
        let shells = matches!(target, TargetSpec::Shells { .. });
        let (k, n_mcmc, l, k_g, n_c, n_final) = benchmark_row(shells, dim)
            .ok_or_else(|| Error::Config(format!("no benchmark preset for dimension {dim}")))?;
        Ok(Self {
            seed: 0,
            output: None,
            target,
            mcmc: McmcConfig {
                chains: k,
                samples: n_mcmc,
                update_interval: if dim == 2 { 200 } else { 500 },
            },
            patching: PatchingConfig {
                burn_in: default_burn_in(),
                patch_length: l,
                r_critical: default_r_critical(),
                group_dims: if shells { Vec::new() } else { vec![0, 1] },
                components_per_group: k_g,
            },
            clustering: ClusteringConfig::default(),
            pmc: PmcConfig {
                proposal: if shells { ProposalKind::Gaussian } else { ProposalKind::StudentT },
                nu: if shells { None } else { Some(12.0) },
                samples_per_component: n_c,
                final_samples: n_final,
                eps: default_eps(),
                t_min: default_t_min(),
                t_max: default_t_max(),
                prune_threshold: default_prune(),
            },
        })
    }

    /// Benchmark settings for the Gaussian-shell target, `d ∈ {2, 10, 20}`.
    pub fn shells(dim: usize) -> Result<Self> {
        Self::benchmark(TargetSpec::shells(dim))
    }

    /// Benchmark settings for the heavy-tail target, `d ∈ {2, 10, 20}`.
    pub fn tails(dim: usize) -> Result<Self> {
        Self::benchmark(TargetSpec::tails(dim))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let dim = self.target.dim();
        if dim == 0 {
            return bad("target.dim must be positive");
        }
        if self.mcmc.chains == 0 || self.mcmc.samples < 2 {
            return bad("mcmc.chains must be ≥ 1 and mcmc.samples ≥ 2");
        }
        if self.mcmc.update_interval == 0 || self.mcmc.update_interval > self.mcmc.samples {
            return bad("mcmc.update_interval must be in 1..=mcmc.samples");
        }
        let p = &self.patching;
        if !(0.0..1.0).contains(&p.burn_in) {
            return bad("patching.burn_in must be in [0, 1)");
        }
        if p.patch_length < 2 || p.components_per_group == 0 {
            return bad("patching.patch_length must be ≥ 2 and components_per_group ≥ 1");
        }
        if p.r_critical <= 1.0 {
            return bad("patching.r_critical must exceed 1");
        }
        if p.group_dims.iter().any(|&j| j >= dim) {
            return bad("patching.group_dims index out of range");
        }
        if !(self.clustering.eps_min > 0.0) {
            return bad("clustering.eps_min must be positive");
        }
        let q = &self.pmc;
        match (q.proposal, q.nu) {
            (ProposalKind::StudentT, Some(nu)) if nu > 0.0 => {}
            (ProposalKind::StudentT, _) => return bad("pmc.nu must be positive for a Student-t proposal"),
            (ProposalKind::Gaussian, Some(_)) => return bad("pmc.nu is only valid with proposal = \"student_t\""),
            (ProposalKind::Gaussian, None) => {}
        }
        if q.samples_per_component == 0 || q.final_samples < 2 {
            return bad("pmc.samples_per_component must be ≥ 1 and final_samples ≥ 2");
        }
        if !(q.eps > 0.0) || q.t_min > q.t_max && q.t_max > 0 || q.prune_threshold < 0.0 {
            return bad("pmc.eps must be positive, t_min ≤ t_max, prune_threshold ≥ 0");
        }
        Ok(())
    }
}
