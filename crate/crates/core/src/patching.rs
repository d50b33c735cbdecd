//! Turning chain histories into Gaussian mixture components.
//!
//! Short patches of `L` iterations give the many-component input mixture of the
//! clustering stage; chain groups (by Gelman-Rubin `R`) split into a few long
//! patches give its initial output mixture.

use serde::Serialize;

use crate::densities::{CovarianceFactor, MixtureComponent, MixtureDensity};
use crate::error::{Error, Result};
use crate::mcmc::Chain;
use crate::stats;

/// Post-burn-in view of a chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainSlice<'a> {
    pub dim: usize,
    pub samples: &'a [f64],
    pub accepted: &'a [bool],
    /// Index of the first retained iteration in the full chain.
    pub offset: usize,
}

impl<'a> ChainSlice<'a> {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn sample(&self, i: usize) -> &'a [f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    fn truncated(&self, n: usize) -> ChainSlice<'a> {
        ChainSlice {
            dim: self.dim,
            samples: &self.samples[..n * self.dim],
            accepted: &self.accepted[..n],
            offset: self.offset,
        }
    }
}

/// Drop the first `⌊a·N⌋` iterations.
pub fn discard_burn_in(chain: &Chain, a: f64) -> ChainSlice<'_> {
    debug_assert!((0.0..1.0).contains(&a));
    let skip = ((a * chain.len() as f64).floor() as usize).min(chain.len());
    ChainSlice {
        dim: chain.dim,
        samples: &chain.samples[skip * chain.dim..],
        accepted: &chain.accepted[skip..],
        offset: skip,
    }
}

/// Gaussian from the sample moments of a block of points. A covariance that
/// cannot be factored loses its off-diagonal entries; a block with a zero
/// variance yields nothing.
pub fn component_from_points(points: &[f64], dim: usize) -> Option<MixtureComponent> {
    if points.len() < 2 * dim {
        return None;
    }
    let (mean, cov) = stats::mean_and_covariance(points, dim);
    let factor = CovarianceFactor::from_covariance(&cov, dim).or_else(|_| {
        let diag: Vec<f64> = (0..dim).map(|i| cov[i * dim + i]).collect();
        CovarianceFactor::diagonal(&diag)
    });
    MixtureComponent::gaussian(mean, factor.ok()?).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PatchSource {
    pub chain: usize,
    /// First iteration of the patch in the full chain.
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Default)]
pub struct PatchSet {
    pub components: Vec<MixtureComponent>,
    pub source: Vec<PatchSource>,
}

/// Split a slice into `⌊n/L⌋` consecutive patches, the remainder going to the
/// last one. Patches without an accepted move are dropped.
pub fn make_patches(slice: &ChainSlice<'_>, patch_len: usize, chain: usize) -> PatchSet {
    assert!(patch_len >= 2, "patch length must be at least 2");
    let n = slice.len();
    let count = n / patch_len;
    let mut set = PatchSet::default();
    for p in 0..count {
        let start = p * patch_len;
        let end = if p + 1 == count { n } else { start + patch_len };
        // moves within the patch; the first flag refers to the step into it
        if !slice.accepted[start + 1..end].iter().any(|&a| a) {
            continue;
        }
        let points = &slice.samples[start * slice.dim..end * slice.dim];
        if let Some(c) = component_from_points(points, slice.dim) {
            set.components.push(c);
            set.source.push(PatchSource {
                chain,
                start: slice.offset + start,
                len: end - start,
            });
        }
    }
    set
}

/// Potential scale reduction per parameter,
/// `R = sqrt(((n−1)/n·W + B/n) / W)`, over equal-length slices (longer slices
/// are truncated to the shortest). `W = 0` gives `+∞`.
pub fn gelman_rubin(slices: &[ChainSlice<'_>]) -> Vec<f64> {
    let dim = slices.first().map_or(0, |s| s.dim);
    let n = slices.iter().map(|s| s.len()).min().unwrap_or(0);
    let m = slices.len();
    if m < 2 || n < 2 {
        return vec![f64::INFINITY; dim];
    }
    let nf = n as f64;
    let mut means = vec![vec![0.0; dim]; m];
    let mut vars = vec![vec![0.0; dim]; m];
    for (c, s) in slices.iter().enumerate() {
        let s = s.truncated(n);
        for i in 0..n {
            for (acc, v) in means[c].iter_mut().zip(s.sample(i)) {
                *acc += v;
            }
        }
        for v in &mut means[c] {
            *v /= nf;
        }
        for i in 0..n {
            for (j, v) in s.sample(i).iter().enumerate() {
                vars[c][j] += (v - means[c][j]).powi(2);
            }
        }
        for v in &mut vars[c] {
            *v /= nf - 1.0;
        }
    }
    (0..dim)
        .map(|j| {
            let w = vars.iter().map(|v| v[j]).sum::<f64>() / m as f64;
            if w <= 0.0 {
                return f64::INFINITY;
            }
            let grand = means.iter().map(|mu| mu[j]).sum::<f64>() / m as f64;
            let b_over_n = means.iter().map(|mu| (mu[j] - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
            (((nf - 1.0) / nf * w + b_over_n) / w).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainGroup {
    pub chain_indices: Vec<usize>,
    /// `R` per parameter over the group; empty for a single chain.
    pub r_values: Vec<f64>,
}

/// Greedy first-fit grouping in chain order: a chain joins the first group
/// whose joint `R` stays below `r_critical` in every dimension of `dims`
/// (all dimensions when `dims` is empty).
pub fn group_chains(slices: &[ChainSlice<'_>], r_critical: f64, dims: &[usize]) -> Vec<ChainGroup> {
    let mut groups: Vec<ChainGroup> = Vec::new();
    for (idx, _) in slices.iter().enumerate() {
        let mut placed = false;
        for g in groups.iter_mut() {
            let members: Vec<ChainSlice<'_>> = g
                .chain_indices
                .iter()
                .chain(std::iter::once(&idx))
                .map(|&i| slices[i])
                .collect();
            let r = gelman_rubin(&members);
            let ok = if dims.is_empty() {
                r.iter().all(|&v| v < r_critical)
            } else {
                dims.iter().all(|&j| r.get(j).is_some_and(|&v| v < r_critical))
            };
            if ok {
                g.chain_indices.push(idx);
                g.r_values = r;
                placed = true;
                break;
            }
        }
        if !placed {
            groups.push(ChainGroup {
                chain_indices: vec![idx],
                r_values: Vec::new(),
            });
        }
    }
    groups
}

/// Minimal lexicographic partition of `total` into `parts` parts: the first
/// `total mod parts` entries are `⌈total/parts⌉`, the rest `⌊total/parts⌋`.
pub fn integer_partition(total: usize, parts: usize) -> Result<Vec<usize>> {
    if parts == 0 || total < parts {
        return Err(Error::PartitionUnderflow { total, parts });
    }
    let base = total / parts;
    let extra = total % parts;
    Ok((0..parts).map(|i| if i < extra { base + 1 } else { base }).collect())
}

fn split_blocks(points: &[f64], dim: usize, blocks: usize, out: &mut Vec<MixtureComponent>) {
    let n = points.len() / dim;
    for b in 0..blocks {
        let start = b * n / blocks;
        let end = (b + 1) * n / blocks;
        if let Some(c) = component_from_points(&points[start * dim..end * dim], dim) {
            out.push(c);
        }
    }
}

/// Initial output mixture for clustering: `per_group` components from long
/// patches of every chain group, all with equal weight.
pub fn long_patch_init(
    groups: &[ChainGroup],
    slices: &[ChainSlice<'_>],
    per_group: usize,
) -> Result<MixtureDensity> {
    let dim = slices.first().ok_or(Error::NoPatches)?.dim;
    let mut components = Vec::new();
    for g in groups {
        if per_group < g.chain_indices.len() {
            let merged: Vec<f64> = g
                .chain_indices
                .iter()
                .flat_map(|&i| slices[i].samples.iter().copied())
                .collect();
            split_blocks(&merged, dim, per_group, &mut components);
        } else {
            let parts = integer_partition(per_group, g.chain_indices.len())?;
            for (&i, &n_i) in g.chain_indices.iter().zip(&parts) {
                split_blocks(slices[i].samples, dim, n_i, &mut components);
            }
        }
    }
    if components.is_empty() {
        return Err(Error::NoPatches);
    }
    MixtureDensity::equal_weights(components)
}

/// Equal-weight mixture of every surviving patch.
pub fn build_patch_mixture(sets: &[PatchSet]) -> Result<MixtureDensity> {
    let components: Vec<MixtureComponent> =
        sets.iter().flat_map(|s| s.components.iter().cloned()).collect();
    if components.is_empty() {
        return Err(Error::NoPatches);
    }
    MixtureDensity::equal_weights(components)
}

/// Diagnostic dump of grouping and patch extraction.
#[derive(Debug, Clone, Serialize)]
pub struct PatchReport {
    pub groups: Vec<GroupEntry>,
    pub patch_counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupEntry {
    pub chains: Vec<usize>,
    pub r_values: Vec<Option<f64>>,
}

impl PatchReport {
    pub fn new(groups: &[ChainGroup], sets: &[PatchSet]) -> Self {
        Self {
            groups: groups
                .iter()
                .map(|g| GroupEntry {
                    chains: g.chain_indices.clone(),
                    r_values: g.r_values.iter().map(|&r| r.is_finite().then_some(r)).collect(),
                })
                .collect(),
            patch_counts: sets.iter().map(|s| s.components.len()).collect(),
        }
    }
}
