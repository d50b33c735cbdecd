//! Population Monte Carlo: adaptive importance sampling with a Gaussian or
//! Student-t mixture proposal.
//!
//! Each step draws a fixed number of samples from the current proposal,
//! weights them by `P/q`, and refits the mixture with one Rao-Blackwellized
//! EM step. Components expected to receive fewer than a minimum number of
//! samples are switched off. Iteration stops once the normalized perplexity
//! changes by less than a relative tolerance between consecutive steps.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::densities::{log_sum_exp, CovarianceFactor, Kind, MixtureComponent, MixtureDensity};
use crate::error::{Error, Result};
use crate::targets::Target;

/// Importance-sampling draws from a proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    pub dim: usize,
    /// Row-major `N × dim`.
    pub points: Vec<f64>,
    pub log_target: Vec<f64>,
    pub log_proposal: Vec<f64>,
    /// `exp(log_target − log_proposal)`; zero outside the support.
    pub weights: Vec<f64>,
    pub component_origin: Vec<usize>,
}

impl WeightedSampleSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Normalized weights computed in log space.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let log_w: Vec<f64> = self
            .log_target
            .iter()
            .zip(&self.log_proposal)
            .map(|(p, q)| if *p == f64::NEG_INFINITY { f64::NEG_INFINITY } else { p - q })
            .collect();
        let total = log_sum_exp(&log_w);
        if !total.is_finite() {
            return Err(Error::AllZeroWeights);
        }
        Ok(log_w.iter().map(|l| (l - total).exp()).collect())
    }

    /// CSV `θ_1..θ_d,log_target,log_proposal,weight`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("θ_{i}")).collect();
        header.extend(["log_target", "log_proposal", "weight"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|v| v.to_string()).collect();
            row.push(self.log_target[i].to_string());
            row.push(self.log_proposal[i].to_string());
            row.push(self.weights[i].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`write_csv`](Self::write_csv); the
    /// dimension is the number of leading parameter columns.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let dim = header.len().checked_sub(3).filter(|&d| d > 0).ok_or_else(|| {
            Error::BadParams("sample CSV needs parameter, log_target, log_proposal and weight columns".into())
        })?;
        if header.iter().skip(dim).collect::<Vec<_>>() != ["log_target", "log_proposal", "weight"] {
            return Err(Error::BadParams("unexpected sample CSV header".into()));
        }
        let mut s = WeightedSampleSet {
            dim,
            points: Vec::new(),
            log_target: Vec::new(),
            log_proposal: Vec::new(),
            weights: Vec::new(),
            component_origin: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::BadParams(format!("sample CSV: {e}")))?;
            s.points.extend_from_slice(&vals[..dim]);
            s.log_target.push(vals[dim]);
            s.log_proposal.push(vals[dim + 1]);
            s.weights.push(vals[dim + 2]);
            s.component_origin.push(0);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmcDiagnostics {
    pub perplexity_history: Vec<f64>,
    pub ess_history: Vec<f64>,
    /// Live components of the proposal used for each draw.
    pub live_counts: Vec<usize>,
    /// Number of sampling rounds in the update loop.
    pub t_final: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvidenceEstimate {
    pub z_hat: f64,
    pub variance_hat: f64,
    pub n: usize,
}

impl EvidenceEstimate {
    pub fn sigma(&self) -> f64 {
        self.variance_hat.sqrt()
    }
}

/// Replace every Gaussian by a Student-t with the same location and scale;
/// weights are reset to equal.
pub fn clone_to_student(q: &MixtureDensity, nu: f64) -> Result<MixtureDensity> {
    let comps = q
        .components()
        .iter()
        .map(|c| c.with_kind(Kind::StudentT { nu }))
        .collect::<Result<Vec<_>>>()?;
    MixtureDensity::equal_weights(comps)
}

/// Draw `n` points from `q` and weight them against `target`.
pub fn importance_sample<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    q: &MixtureDensity,
    n: usize,
    rng: &mut R,
) -> WeightedSampleSet {
    let dim = q.dim();
    let sampler = q.sampler();
    let mut points = Vec::with_capacity(n * dim);
    let mut component_origin = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, j) = sampler.sample(rng);
        points.extend_from_slice(&x);
        component_origin.push(j);
    }
    let logs: Vec<(f64, f64)> = points
        .par_chunks_exact(dim)
        .map(|x| (target.log_density(x), q.log_pdf(x)))
        .collect();
    let (log_target, log_proposal): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
    let weights = log_target
        .iter()
        .zip(&log_proposal)
        .map(|(p, l)| if *p == f64::NEG_INFINITY { 0.0 } else { (p - l).exp() })
        .collect();
    WeightedSampleSet {
        dim,
        points,
        log_target,
        log_proposal,
        weights,
        component_origin,
    }
}

fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::AllZeroWeights);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

fn perplexity_of_normalized(wn: &[f64]) -> f64 {
    let entropy: f64 = -wn.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum::<f64>();
    (entropy.exp() / wn.len() as f64).min(1.0)
}

fn ess_of_normalized(wn: &[f64]) -> f64 {
    (1.0 / (wn.len() as f64 * wn.iter().map(|w| w * w).sum::<f64>())).min(1.0)
}

/// Normalized perplexity `exp(H(w̄))/N`.
pub fn perplexity(weights: &[f64]) -> Result<f64> {
    Ok(perplexity_of_normalized(&normalize(weights)?))
}

/// Normalized effective sample size `1/(N·Σw̄²)`.
pub fn ess(weights: &[f64]) -> Result<f64> {
    Ok(ess_of_normalized(&normalize(weights)?))
}

/// Sample mean of the weights and the variance of that mean.
pub fn evidence(weights: &[f64]) -> EvidenceEstimate {
    let n = weights.len();
    let z_hat = weights.iter().sum::<f64>() / n as f64;
    let variance_hat = if n >= 2 {
        weights.iter().map(|w| (w - z_hat).powi(2)).sum::<f64>() / (n as f64 * (n - 1) as f64)
    } else {
        0.0
    };
    EvidenceEstimate { z_hat, variance_hat, n }
}

/// Kill components whose expected sample count `α·N` is below `threshold`.
pub fn prune_components(q: &MixtureDensity, n: usize, threshold: f64) -> Result<MixtureDensity> {
    let weights: Vec<f64> = q
        .weights()
        .iter()
        .map(|&a| if a * (n as f64) < threshold { 0.0 } else { a })
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllComponentsDead);
    }
    MixtureDensity::new(q.components().to_vec(), weights)
}

/// Per-sample responsibilities of the live components and, for Student-t, the
/// latent scale factors `γ = (ν+d)/(ν+m)`.
struct Posterior {
    live: Vec<usize>,
    /// Row-major `N × live.len()`.
    rho: Vec<f64>,
    gamma: Option<Vec<f64>>,
}

fn posterior(q: &MixtureDensity, s: &WeightedSampleSet, wn: &[f64]) -> Posterior {
    let live: Vec<usize> = q.live().map(|(j, _, _)| j).collect();
    let k = live.len();
    let d = q.dim() as f64;
    let nu = match q.kind() {
        Kind::StudentT { nu } => Some(nu),
        Kind::Gaussian => None,
    };
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..s.len())
        .into_par_iter()
        .map(|i| {
            if wn[i] == 0.0 {
                return (vec![0.0; k], vec![0.0; if nu.is_some() { k } else { 0 }]);
            }
            let x = s.point(i);
            let mut logs = Vec::with_capacity(k);
            let mut gammas = Vec::new();
            for &j in &live {
                let c = &q.components()[j];
                let m = c.mahalanobis_sq(x);
                logs.push(q.weights()[j].ln() + c.log_pdf_from_mahalanobis(m));
                if let Some(nu) = nu {
                    gammas.push((nu + d) / (nu + m));
                }
            }
            let total = log_sum_exp(&logs);
            (logs.iter().map(|l| (l - total).exp()).collect(), gammas)
        })
        .collect();
    let mut rho = Vec::with_capacity(s.len() * k);
    let mut gamma = nu.map(|_| Vec::with_capacity(s.len() * k));
    for (r, g) in rows {
        rho.extend(r);
        if let Some(gv) = gamma.as_mut() {
            gv.extend(g);
        }
    }
    Posterior { live, rho, gamma }
}

/// Component posteriors `ρ_ij`, row-major with one row of live components per
/// sample. Rows of zero-weight samples are zero.
pub fn responsibilities(q: &MixtureDensity, s: &WeightedSampleSet) -> Result<Vec<f64>> {
    let wn = s.normalized_weights()?;
    Ok(posterior(q, s, &wn).rho)
}

/// One Rao-Blackwellized EM update of `q` from samples drawn from it.
///
/// Components whose new weight is zero or whose new covariance cannot be
/// factored are switched off; `ν` stays fixed.
pub fn pmc_update(q: &MixtureDensity, s: &WeightedSampleSet) -> Result<MixtureDensity> {
    let wn = s.normalized_weights()?;
    let post = posterior(q, s, &wn);
    let k = post.live.len();
    let dim = q.dim();
    let n = s.len();
    let updated: Vec<Option<(MixtureComponent, f64)>> = (0..k)
        .into_par_iter()
        .map(|col| {
            let j = post.live[col];
            let old = &q.components()[j];
            let mut alpha = 0.0;
            let mut mean_norm = 0.0;
            let mut mean = vec![0.0; dim];
            for i in 0..n {
                let wr = wn[i] * post.rho[i * k + col];
                if wr == 0.0 {
                    continue;
                }
                alpha += wr;
                let wrg = post.gamma.as_ref().map_or(wr, |g| wr * g[i * k + col]);
                mean_norm += wrg;
                for (m, x) in mean.iter_mut().zip(s.point(i)) {
                    *m += wrg * x;
                }
            }
            if !(alpha > 0.0 && mean_norm > 0.0) {
                return None;
            }
            for m in &mut mean {
                *m /= mean_norm;
            }
            let mut cov = vec![0.0; dim * dim];
            let mut diff = vec![0.0; dim];
            for i in 0..n {
                let wr = wn[i] * post.rho[i * k + col];
                if wr == 0.0 {
                    continue;
                }
                let wrg = post.gamma.as_ref().map_or(wr, |g| wr * g[i * k + col]);
                for ((dv, x), m) in diff.iter_mut().zip(s.point(i)).zip(&mean) {
                    *dv = x - m;
                }
                for a in 0..dim {
                    for b in 0..=a {
                        cov[a * dim + b] += wrg * diff[a] * diff[b];
                    }
                }
            }
            for a in 0..dim {
                for b in 0..=a {
                    let v = cov[a * dim + b] / alpha;
                    cov[a * dim + b] = v;
                    cov[b * dim + a] = v;
                }
            }
            let factor = CovarianceFactor::from_covariance(&cov, dim).ok()?;
            Some((MixtureComponent::new(mean, factor, old.kind()).ok()?, alpha))
        })
        .collect();

    let mut components = q.components().to_vec();
    let mut weights = vec![0.0; q.len()];
    for (col, u) in updated.into_iter().enumerate() {
        if let Some((c, a)) = u {
            let j = post.live[col];
            components[j] = c;
            weights[j] = a;
        }
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllComponentsDead);
    }
    MixtureDensity::new(components, weights)
}

/// Tunables of the PMC stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmcSettings {
    /// Samples per initial live component; `N = K·N_c` stays fixed.
    pub samples_per_component: usize,
    pub final_samples: usize,
    pub eps: f64,
    pub t_min: usize,
    pub t_max: usize,
    pub prune_threshold: f64,
}

impl Default for PmcSettings {
    fn default() -> Self {
        Self {
            samples_per_component: 200,
            final_samples: 5000,
            eps: 0.05,
            t_min: 1,
            t_max: 20,
            prune_threshold: 20.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PmcOutcome {
    pub samples: WeightedSampleSet,
    pub proposal: MixtureDensity,
    pub diagnostics: PmcDiagnostics,
    pub evidence: EvidenceEstimate,
    /// Samples per update round.
    pub n_per_step: usize,
}

/// Run the update loop until the perplexity settles, then draw the final
/// sample from the last proposal. When `t_max` rounds pass without
/// convergence the final draw still happens and `converged` is false.
pub fn run_pmc<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    q0: &MixtureDensity,
    settings: &PmcSettings,
    rng: &mut R,
) -> Result<PmcOutcome> {
    let n = q0.live_count() * settings.samples_per_component;
    let mut q = q0.clone();
    let mut diag = PmcDiagnostics {
        perplexity_history: Vec::new(),
        ess_history: Vec::new(),
        live_counts: Vec::new(),
        t_final: 0,
        converged: false,
    };
    let fail = |steps: usize, q: &MixtureDensity| Error::PmcFailed {
        steps,
        last_proposal: Box::new(q.clone()),
    };
    let mut t = 0;
    while t < settings.t_max && !diag.converged {
        let s = importance_sample(target, &q, n, rng);
        let wn = s.normalized_weights().map_err(|_| fail(t, &q))?;
        let p = perplexity_of_normalized(&wn);
        diag.ess_history.push(ess_of_normalized(&wn));
        diag.live_counts.push(q.live_count());
        if t >= settings.t_min {
            if let Some(&prev) = diag.perplexity_history.last() {
                if ((p - prev) / p).abs() < settings.eps {
                    diag.converged = true;
                }
            }
        }
        diag.perplexity_history.push(p);
        if !diag.converged {
            let pruned = prune_components(&q, n, settings.prune_threshold).map_err(|_| fail(t, &q))?;
            q = pmc_update(&pruned, &s).map_err(|_| fail(t, &pruned))?;
        }
        t += 1;
    }
    diag.t_final = t;
    let samples = importance_sample(target, &q, settings.final_samples, rng);
    let evidence = evidence(&samples.weights);
    Ok(PmcOutcome {
        samples,
        proposal: q,
        diagnostics: diag,
        evidence,
        n_per_step: n,
    })
}

/// Target evaluations of a full run: `k·N_MCMC + t_final·K·N_c + N_final`.
pub fn total_calls(
    chains: usize,
    n_mcmc: usize,
    t_final: usize,
    components: usize,
    samples_per_component: usize,
    final_samples: usize,
) -> u64 {
    (chains * n_mcmc + t_final * components * samples_per_component + final_samples) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::targets::TargetDensity;
    use approx::assert_abs_diff_eq;

    fn gauss(mean: Vec<f64>, var: f64) -> MixtureComponent {
        let d = mean.len();
        MixtureComponent::gaussian(mean, CovarianceFactor::diagonal(&vec![var; d]).unwrap()).unwrap()
    }

    /// Target equal to `c·q` on a box large enough to hold all of `q`'s mass.
    fn scaled_copy(q: &MixtureDensity, c: f64) -> TargetDensity {
        let d = q.dim();
        let q = q.clone();
        let log_volume = d as f64 * 200f64.ln();
        TargetDensity::custom(vec![-100.0; d], vec![100.0; d], move |x| q.log_pdf(x) + c.ln() + log_volume)
            .unwrap()
    }

    #[test]
    fn perplexity_and_ess_values() {
        assert_abs_diff_eq!(perplexity(&[1.0; 4]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(perplexity(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.25, epsilon = 1e-12);
        let h = -(0.5f64 * 0.5f64.ln() + 0.5 * 0.25f64.ln());
        assert_abs_diff_eq!(perplexity(&[2.0, 1.0, 1.0]).unwrap(), h.exp() / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(perplexity(&[2.0, 1.0, 1.0]).unwrap(), 0.942_809_041_582_063_4, epsilon = 1e-12);
        assert_abs_diff_eq!(ess(&[3.0; 5]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ess(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(ess(&[2.0, 1.0, 1.0]).unwrap(), 1.0 / (3.0 * 0.375), epsilon = 1e-12);
        assert!(matches!(perplexity(&[0.0, 0.0]), Err(Error::AllZeroWeights)));
        assert!(matches!(ess(&[0.0]), Err(Error::AllZeroWeights)));
    }

    #[test]
    fn evidence_values() {
        assert_eq!(evidence(&[2.0, 2.0, 2.0]), EvidenceEstimate { z_hat: 2.0, variance_hat: 0.0, n: 3 });
        let e = evidence(&[1.0, 2.0, 3.0]);
        assert_eq!(e.z_hat, 2.0);
        assert_abs_diff_eq!(e.variance_hat, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn prune_rules() {
        let comps = vec![gauss(vec![0.0], 1.0), gauss(vec![1.0], 1.0)];
        let q = MixtureDensity::new(comps.clone(), vec![0.5, 0.5]).unwrap();
        assert_eq!(prune_components(&q, 100, 20.0).unwrap().live_count(), 2);
        let q = MixtureDensity::new(comps.clone(), vec![0.99, 0.01]).unwrap();
        let p = prune_components(&q, 1000, 20.0).unwrap();
        assert_eq!(p.weights(), &[1.0, 0.0]);
        let q = MixtureDensity::new(comps.clone(), vec![0.199, 0.801]).unwrap();
        assert_eq!(prune_components(&q, 100, 20.0).unwrap().weights()[0], 0.0);
        let q = MixtureDensity::new(comps, vec![0.5, 0.5]).unwrap();
        assert!(matches!(prune_components(&q, 10, 20.0), Err(Error::AllComponentsDead)));
    }

    #[test]
    fn student_clone() {
        let q = MixtureDensity::new(vec![gauss(vec![0.0, 1.0], 2.0), gauss(vec![3.0, 1.0], 1.0)], vec![0.9, 0.1]).unwrap();
        let t = clone_to_student(&q, 12.0).unwrap();
        assert_eq!(t.kind(), Kind::StudentT { nu: 12.0 });
        assert_eq!(t.weights(), &[0.5, 0.5]);
        assert_eq!(t.components()[1].mean(), q.components()[1].mean());
        assert_eq!(t.components()[1].cov(), q.components()[1].cov());
        assert_eq!(q.with_equal_weights().weights(), &[0.5, 0.5]);
    }

    #[test]
    fn weights_against_proportional_target() {
        let q = MixtureDensity::new(vec![gauss(vec![0.0, 0.0], 1.0), gauss(vec![3.0, -1.0], 0.5)], vec![0.3, 0.7]).unwrap();
        let t = scaled_copy(&q, 2.0);
        let mut r = rng::stream(1, &[]);
        let s = importance_sample(&t, &q, 2000, &mut r);
        for &w in &s.weights {
            assert_abs_diff_eq!(w, 2.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(perplexity(&s.weights).unwrap(), 1.0, epsilon = 1e-12);
        let e = evidence(&s.weights);
        assert_abs_diff_eq!(e.z_hat, 2.0, epsilon = 1e-9);
        assert!(e.variance_hat < 1e-20);
    }

    #[test]
    fn out_of_box_draws_get_zero_weight() {
        let q = MixtureDensity::equal_weights(vec![gauss(vec![0.9], 0.01)]).unwrap();
        let t = TargetDensity::custom(vec![0.0], vec![1.0], |_| 0.0).unwrap();
        let s = importance_sample(&t, &q, 5000, &mut rng::stream(2, &[]));
        let outside = (0..s.len()).filter(|&i| s.point(i)[0] > 1.0).count();
        assert!(outside > 0);
        for i in 0..s.len() {
            if s.point(i)[0] > 1.0 {
                assert_eq!(s.weights[i], 0.0);
            } else {
                assert!(s.weights[i] > 0.0);
            }
        }
    }

    #[test]
    fn uniform_box_evidence() {
        // target = 1 on [−1,1]² (Z = 4), proposal a broad Gaussian mostly inside
        let q = MixtureDensity::equal_weights(vec![gauss(vec![0.0, 0.0], 0.36)]).unwrap();
        let t = TargetDensity::custom(vec![-1.0; 2], vec![1.0; 2], |_| 4f64.ln()).unwrap();
        let s = importance_sample(&t, &q, 100_000, &mut rng::stream(3, &[]));
        let e = evidence(&s.weights);
        // truth: ∫ over box = 4·(1/4)·4 = 4 · P(inside) ... with density 4/4=1 ⇒ Z = 4
        assert!((e.z_hat - 4.0).abs() < 5.0 * e.sigma(), "{} ± {}", e.z_hat, e.sigma());
    }

    #[test]
    fn update_identities() {
        let q = MixtureDensity::new(
            vec![gauss(vec![-2.0, 0.0], 1.0), gauss(vec![2.0, 0.5], 0.5), gauss(vec![0.0, 3.0], 2.0)],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let t = TargetDensity::custom(vec![-20.0; 2], vec![20.0; 2], |x| -0.5 * (x[0] * x[0] / 4.0 + x[1] * x[1]))
            .unwrap();
        for kind in [Kind::Gaussian, Kind::StudentT { nu: 5.0 }] {
            let q = if kind == Kind::Gaussian { q.clone() } else { clone_to_student(&q, 5.0).unwrap() };
            let s = importance_sample(&t, &q, 5000, &mut rng::stream(4, &[]));
            let wn = s.normalized_weights().unwrap();
            let post = posterior(&q, &s, &wn);
            for i in 0..s.len() {
                let row: f64 = post.rho[i * 3..i * 3 + 3].iter().sum();
                assert!((row - 1.0).abs() < 1e-12);
            }
            let u = pmc_update(&q, &s).unwrap();
            assert!((u.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(u.weights().iter().all(|&w| w >= 0.0));
            assert_eq!(u.kind(), q.kind());
        }
    }

    #[test]
    fn fixed_point_single_gaussian() {
        let comp = MixtureComponent::gaussian(
            vec![1.0, -2.0],
            CovarianceFactor::from_covariance(&[2.0, 0.5, 0.5, 1.0], 2).unwrap(),
        )
        .unwrap();
        let q = MixtureDensity::equal_weights(vec![comp]).unwrap();
        let t = scaled_copy(&q, 1.0);
        let n = 100_000;
        let s = importance_sample(&t, &q, n, &mut rng::stream(5, &[]));
        let u = pmc_update(&q, &s).unwrap();
        assert_eq!(u.weights(), &[1.0]);
        let shift: f64 = u.components()[0]
            .mean()
            .iter()
            .zip(q.components()[0].mean())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(shift <= 5.0 * (3.0 / n as f64).sqrt());
    }

    #[test]
    fn converges_on_its_own_proposal() {
        let q = MixtureDensity::equal_weights(vec![gauss(vec![0.5, 0.5], 1.0)]).unwrap();
        let t = scaled_copy(&q, 1.0);
        let settings = PmcSettings { samples_per_component: 2000, final_samples: 1000, ..Default::default() };
        let out = run_pmc(&t, &q, &settings, &mut rng::stream(6, &[])).unwrap();
        assert!(out.diagnostics.converged);
        assert_eq!(out.diagnostics.t_final, settings.t_min + 1);
        assert!(*out.diagnostics.perplexity_history.last().unwrap() > 0.99);
        assert_eq!(out.samples.len(), 1000);
    }

    #[test]
    fn zero_rounds_keeps_initial_proposal() {
        let q = MixtureDensity::equal_weights(vec![gauss(vec![0.0], 1.0)]).unwrap();
        let t = scaled_copy(&q, 1.0);
        let settings = PmcSettings { t_max: 0, final_samples: 10, ..Default::default() };
        let out = run_pmc(&t, &q, &settings, &mut rng::stream(7, &[])).unwrap();
        assert!(!out.diagnostics.converged);
        assert_eq!(out.diagnostics.t_final, 0);
        assert_eq!(out.proposal, q);
    }

    #[test]
    fn deterministic_under_seed() {
        let q = MixtureDensity::equal_weights(vec![gauss(vec![0.0], 4.0), gauss(vec![3.0], 1.0)]).unwrap();
        let t = TargetDensity::custom(vec![-10.0], vec![10.0], |x| -0.5 * (x[0] - 1.0).powi(2)).unwrap();
        let settings = PmcSettings { final_samples: 500, ..Default::default() };
        let a = run_pmc(&t, &q, &settings, &mut rng::stream(8, &[])).unwrap();
        let b = run_pmc(&t, &q, &settings, &mut rng::stream(8, &[])).unwrap();
        assert_eq!(a.diagnostics, b.diagnostics);
        assert_eq!(a.evidence, b.evidence);
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn call_accounting() {
        assert_eq!(total_calls(0, 0, 0, 0, 0, 0), 0);
        assert_eq!(total_calls(8, 10_000, 5, 20, 200, 5200), 105_200);
    }
}
