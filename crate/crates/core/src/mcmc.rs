//! Adaptive-Metropolis prerun.
//!
//! Each chain starts uniformly in the target box with a diagonal proposal built
//! from the prior variances, scaled by `2.38²/d`. After every batch of
//! `update_interval` iterations the proposal covariance is blended with the
//! batch sample covariance using weight `t^(−1/2)` and the scale factor is
//! steered toward an acceptance rate between 15% and 35%.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::CovarianceFactor;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;
use crate::targets::Target;

/// Batch-wise adaptation rule for the proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adaptation {
    /// Iterations per batch.
    pub update_interval: usize,
    pub min_acceptance: f64,
    pub max_acceptance: f64,
    pub shrink: f64,
    pub grow: f64,
}

impl Adaptation {
    pub fn new(update_interval: usize) -> Self {
        Self {
            update_interval,
            min_acceptance: 0.15,
            max_acceptance: 0.35,
            shrink: 0.5,
            grow: 1.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub log_target: f64,
    /// Unscaled proposal covariance; the random walk uses `scale·Σ`.
    pub proposal_cov: CovarianceFactor,
    pub scale: f64,
    pub iteration: usize,
    /// Number of adaptation steps performed so far.
    pub updates: usize,
}

/// One random-walk history.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub dim: usize,
    /// Row-major `len × dim`.
    pub samples: Vec<f64>,
    pub log_targets: Vec<f64>,
    /// `accepted[0]` marks the starting point.
    pub accepted: Vec<bool>,
    pub acceptance_rate_history: Vec<f64>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.log_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_targets.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        self.accepted[1..].iter().filter(|&&a| a).count() as f64 / (self.len() - 1) as f64
    }

    /// CSV with header `θ_1..θ_d,log_target,accepted`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("θ_{i}")).collect();
        header.push("log_target".into());
        header.push("accepted".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.sample(i).iter().map(|v| v.to_string()).collect();
            row.push(self.log_targets[i].to_string());
            row.push(u8::from(self.accepted[i]).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_bounded<T: Target + ?Sized>(target: &T) -> Result<()> {
    let ok = target
        .lower()
        .iter()
        .zip(target.upper())
        .all(|(a, b)| a.is_finite() && b.is_finite() && a < b);
    if ok {
        Ok(())
    } else {
        Err(Error::UnboundedSupport)
    }
}

fn initial_proposal<T: Target + ?Sized>(target: &T) -> Result<(CovarianceFactor, f64)> {
    check_bounded(target)?;
    let variances: Vec<f64> = target
        .lower()
        .iter()
        .zip(target.upper())
        .map(|(a, b)| (b - a).powi(2) / 12.0)
        .collect();
    let d = target.dim() as f64;
    Ok((CovarianceFactor::diagonal(&variances)?, 2.38 * 2.38 / d))
}

/// Start uniformly in the box with the prior-variance proposal.
pub fn init_chain<T: Target + ?Sized, R: Rng + ?Sized>(target: &T, rng: &mut R) -> Result<ChainState> {
    let (proposal_cov, scale) = initial_proposal(target)?;
    let position: Vec<f64> = target
        .lower()
        .iter()
        .zip(target.upper())
        .map(|(a, b)| rng.random_range(*a..*b))
        .collect();
    let log_target = target.log_density(&position);
    Ok(ChainState {
        position,
        log_target,
        proposal_cov,
        scale,
        iteration: 0,
        updates: 0,
    })
}

/// Start at an explicit point with the prior-variance proposal.
pub fn init_chain_at<T: Target + ?Sized>(target: &T, start: Vec<f64>) -> Result<ChainState> {
    if start.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: start.len(),
        });
    }
    let (proposal_cov, scale) = initial_proposal(target)?;
    let log_target = target.log_density(&start);
    Ok(ChainState {
        position: start,
        log_target,
        proposal_cov,
        scale,
        iteration: 0,
        updates: 0,
    })
}

/// One Metropolis move with proposal `N(x, scale·Σ)`. Returns whether the
/// proposal was accepted.
pub fn metropolis_step<T: Target + ?Sized, R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &T,
    rng: &mut R,
) -> bool {
    let d = state.position.len();
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut step = vec![0.0; d];
    state.proposal_cov.mul_vec(&z, &mut step);
    let s = state.scale.sqrt();
    let proposal: Vec<f64> = state
        .position
        .iter()
        .zip(&step)
        .map(|(x, dx)| x + s * dx)
        .collect();
    let u: f64 = rng.random();
    state.iteration += 1;
    let log_new = target.log_density(&proposal);
    accept_move(state, proposal, log_new, u)
}

fn accept_move(state: &mut ChainState, proposal: Vec<f64>, log_new: f64, u: f64) -> bool {
    if log_new == f64::NEG_INFINITY || log_new.is_nan() {
        return false;
    }
    let log_ratio = log_new - state.log_target;
    // u ∈ [0, 1): ratio ≥ 1 is always accepted
    if log_ratio >= 0.0 || u.ln() < log_ratio {
        state.position = proposal;
        state.log_target = log_new;
        true
    } else {
        false
    }
}

/// Positive definite with every Cholesky pivot of the correlation matrix
/// above `1e-4`, i.e. no direction squeezed below 1e-4 of its marginal spread.
fn well_conditioned(cov: &[f64], d: usize) -> bool {
    let sd: Vec<f64> = (0..d).map(|i| cov[i * d + i].sqrt()).collect();
    if sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return false;
    }
    let corr: Vec<f64> = (0..d * d).map(|k| cov[k] / (sd[k / d] * sd[k % d])).collect();
    CovarianceFactor::from_covariance(&corr, d).is_ok_and(|f| (0..d).all(|i| f.entry(i, i) > 1e-4))
}

/// Apply one adaptation step from the most recent batch (row-major samples and
/// their accept flags).
pub fn adapt_proposal(state: &mut ChainState, batch: &[f64], accepted: &[bool], rule: &Adaptation) {
    let d = state.position.len();
    let n = accepted.len();
    debug_assert_eq!(batch.len(), n * d);
    state.updates += 1;
    let moves = accepted.iter().filter(|&&a| a).count();
    let rate = if n == 0 { 0.0 } else { moves as f64 / n as f64 };
    if moves > 0 && n >= 2 {
        let alpha = (state.updates as f64).powf(-0.5);
        let (_, mut batch_cov) = stats::mean_and_covariance(batch, d);
        if moves < d || !well_conditioned(&batch_cov, d) {
            // too few distinct points to span the space: keep the variances only
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        batch_cov[i * d + j] = 0.0;
                    }
                }
            }
        }
        let old = state.proposal_cov.covariance();
        let blended: Vec<f64> = old.iter().zip(&batch_cov).map(|(o, b)| (1.0 - alpha) * o + alpha * b).collect();
        if let Ok(f) = CovarianceFactor::from_covariance(&blended, d) {
            state.proposal_cov = f;
        }
    }
    if rate < rule.min_acceptance {
        state.scale *= rule.shrink;
    } else if rate > rule.max_acceptance {
        state.scale *= rule.grow;
    }
}

/// Run a chain of `n_samples` points (the starting point included). With
/// `adaptation = None` the proposal stays fixed.
pub fn run_chain<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    mut state: ChainState,
    n_samples: usize,
    adaptation: Option<&Adaptation>,
    rng: &mut R,
) -> Chain {
    let d = state.position.len();
    let mut chain = Chain {
        dim: d,
        samples: Vec::with_capacity(n_samples * d),
        log_targets: Vec::with_capacity(n_samples),
        accepted: Vec::with_capacity(n_samples),
        acceptance_rate_history: Vec::new(),
    };
    if n_samples == 0 {
        return chain;
    }
    chain.samples.extend_from_slice(&state.position);
    chain.log_targets.push(state.log_target);
    chain.accepted.push(true);
    for i in 1..n_samples {
        let acc = metropolis_step(&mut state, target, rng);
        chain.samples.extend_from_slice(&state.position);
        chain.log_targets.push(state.log_target);
        chain.accepted.push(acc);
        if let Some(rule) = adaptation {
            let m = rule.update_interval;
            if m > 0 && (i + 1) % m == 0 {
                let start = i + 1 - m;
                let flags = &chain.accepted[start..=i];
                let rate = flags.iter().filter(|&&a| a).count() as f64 / m as f64;
                chain.acceptance_rate_history.push(rate);
                adapt_proposal(&mut state, &chain.samples[start * d..(i + 1) * d], flags, rule);
            }
        }
    }
    chain
}

/// Run `k` independent adaptive chains in parallel. Chain `i` uses the random
/// sub-stream `(seed, i)` and, if given, starts at `starts[i]`.
///
/// `n_mcmc` is rounded down to a multiple of the update interval.
pub fn run_prerun<T: Target + ?Sized>(
    target: &T,
    k: usize,
    n_mcmc: usize,
    update_interval: usize,
    seed: u64,
    starts: Option<&[Vec<f64>]>,
) -> Result<Vec<Chain>> {
    check_bounded(target)?;
    if k == 0 {
        return Err(Error::BadParams("need at least one chain".into()));
    }
    let n = if update_interval > 0 {
        n_mcmc - n_mcmc % update_interval
    } else {
        n_mcmc
    };
    let rule = Adaptation::new(update_interval);
    (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, &[i as u64]);
            let state = match starts.and_then(|s| s.get(i)) {
                Some(start) => init_chain_at(target, start.clone())?,
                None => init_chain(target, &mut rng)?,
            };
            Ok(run_chain(target, state, n, Some(&rule), &mut rng))
        })
        .collect()
}
