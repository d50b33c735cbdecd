//! Gaussian mixture reduction by regroup/refit iterations.
//!
//! Each input component is assigned to the output component closest in
//! `KL(input ‖ output)`; each output is then replaced by the moment-matched
//! merge of its inputs. Outputs that receive no input die.

use rayon::prelude::*;
use serde::Serialize;

use crate::densities::{gauss_kl, CovarianceFactor, MixtureComponent, MixtureDensity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMapping {
    /// Output index for every input component.
    pub assignment: Vec<usize>,
    /// Whether each output received at least one input.
    pub live: Vec<bool>,
}

impl ClusterMapping {
    fn from_assignment(assignment: Vec<usize>, outputs: usize) -> Self {
        let mut live = vec![false; outputs];
        for &j in &assignment {
            live[j] = true;
        }
        Self { assignment, live }
    }

    /// Same mapping with outputs renumbered over the live ones only, matching
    /// the component order produced by [`refit`].
    pub fn compacted(&self) -> Self {
        let mut new_index = vec![usize::MAX; self.live.len()];
        let mut next = 0;
        for (j, &l) in self.live.iter().enumerate() {
            if l {
                new_index[j] = next;
                next += 1;
            }
        }
        Self {
            assignment: self.assignment.iter().map(|&j| new_index[j]).collect(),
            live: vec![true; next],
        }
    }

    pub fn live_count(&self) -> usize {
        self.live.iter().filter(|&&l| l).count()
    }
}

/// Assign every input to its nearest live output; ties go to the lowest index.
pub fn regroup(q_in: &MixtureDensity, q_out: &MixtureDensity) -> ClusterMapping {
    let outputs: Vec<(usize, &MixtureComponent)> = q_out.live().map(|(j, _, c)| (j, c)).collect();
    let assignment = q_in
        .components()
        .par_iter()
        .map(|input| {
            let mut best = (f64::INFINITY, usize::MAX);
            for &(j, out) in &outputs {
                let kl = gauss_kl(input, out);
                if kl < best.0 || best.1 == usize::MAX {
                    best = (kl, j);
                }
            }
            best.1
        })
        .collect();
    ClusterMapping::from_assignment(assignment, q_out.len())
}

/// Moment-matched merge of the inputs assigned to each live output. Dead
/// outputs are dropped, so output `k` of the result is the `k`-th live output.
pub fn refit(q_in: &MixtureDensity, mapping: &ClusterMapping) -> Result<MixtureDensity> {
    let d = q_in.dim();
    let live: Vec<usize> = (0..mapping.live.len()).filter(|&j| mapping.live[j]).collect();
    if live.is_empty() {
        return Err(Error::NoLiveOutputs);
    }
    let merged: Vec<Option<(MixtureComponent, f64)>> = live
        .par_iter()
        .map(|&j| {
            let members: Vec<usize> = (0..mapping.assignment.len())
                .filter(|&i| mapping.assignment[i] == j)
                .collect();
            let weight: f64 = members.iter().map(|&i| q_in.weights()[i]).sum();
            if weight <= 0.0 {
                return None;
            }
            let mut mean = vec![0.0; d];
            for &i in &members {
                let a = q_in.weights()[i];
                for (m, x) in mean.iter_mut().zip(q_in.components()[i].mean()) {
                    *m += a * x;
                }
            }
            for m in &mut mean {
                *m /= weight;
            }
            let mut cov = vec![0.0; d * d];
            for &i in &members {
                let a = q_in.weights()[i];
                let c = &q_in.components()[i];
                let sigma = c.cov().covariance();
                for r in 0..d {
                    let dr = c.mean()[r] - mean[r];
                    for s in 0..d {
                        let ds = c.mean()[s] - mean[s];
                        cov[r * d + s] += a * (sigma[r * d + s] + dr * ds);
                    }
                }
            }
            for v in &mut cov {
                *v /= weight;
            }
            let factor = CovarianceFactor::from_covariance(&cov, d)
                .or_else(|_| {
                    let diag: Vec<f64> = (0..d).map(|r| cov[r * d + r]).collect();
                    CovarianceFactor::diagonal(&diag)
                })
                .ok()?;
            Some((MixtureComponent::gaussian(mean, factor).ok()?, weight))
        })
        .collect();
    let (components, weights): (Vec<_>, Vec<_>) = merged
        .into_iter()
        .map(|m| {
            m.ok_or_else(|| Error::BadParams("live output with zero input weight".into()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    MixtureDensity::new(components, weights)
}

/// `Σᵢ αᵢ·KL(inᵢ ‖ out_{assignment[i]})`.
pub fn cluster_distance(q_in: &MixtureDensity, q_out: &MixtureDensity, mapping: &ClusterMapping) -> f64 {
    let terms: Vec<f64> = q_in
        .components()
        .par_iter()
        .zip(q_in.weights().par_iter())
        .zip(mapping.assignment.par_iter())
        .map(|((c, &a), &j)| if a > 0.0 { a * gauss_kl(c, &q_out.components()[j]) } else { 0.0 })
        .collect();
    terms.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub distance: f64,
    pub live_count: usize,
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub mixture: MixtureDensity,
    pub iterations: usize,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub trace: Vec<TraceRow>,
}

impl ClusterOutcome {
    /// CSV `iteration,distance,live_count`.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Alternate regroup and refit until the relative decrease of the distance
/// drops below `eps_min`, the distance reaches zero, or `max_iter` rounds ran.
pub fn cluster(
    q_in: &MixtureDensity,
    q0_out: &MixtureDensity,
    eps_min: f64,
    max_iter: usize,
) -> Result<ClusterOutcome> {
    if q0_out.live_count() == 0 {
        return Err(Error::NoLiveOutputs);
    }
    let mut q_out = q0_out.clone();
    let mut mapping = regroup(q_in, &q_out);
    let initial_distance = cluster_distance(q_in, &q_out, &mapping);
    let mut previous = initial_distance;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for it in 1..=max_iter.max(1) {
        if it > 1 {
            mapping = regroup(q_in, &q_out);
        }
        q_out = refit(q_in, &mapping)?;
        let distance = cluster_distance(q_in, &q_out, &mapping.compacted());
        iterations = it;
        trace.push(TraceRow {
            iteration: it,
            distance,
            live_count: q_out.len(),
        });
        if distance == 0.0 || (previous > 0.0 && (previous - distance).abs() / previous < eps_min) {
            break;
        }
        previous = distance;
    }
    let final_distance = trace.last().map_or(initial_distance, |r| r.distance);
    Ok(ClusterOutcome {
        mixture: q_out,
        iterations,
        initial_distance,
        final_distance,
        trace,
    })
}
