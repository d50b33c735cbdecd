//! Probability kernels and mixture densities.
//!
//! Everything is evaluated in log space. Mixtures combine their components via
//! log-sum-exp so that far-away components underflow harmlessly.

mod cholesky;
mod serial;

use std::f64::consts::PI;

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

pub use cholesky::{chol_decompose, CovarianceFactor};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Component family of a mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Gaussian,
    StudentT { nu: f64 },
}

/// A single multivariate Gaussian or Student-t kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    mean: Vec<f64>,
    cov: CovarianceFactor,
    kind: Kind,
    // ln of the normalization constant, excluding the Mahalanobis term
    log_norm: f64,
}

impl MixtureComponent {
    pub fn new(mean: Vec<f64>, cov: CovarianceFactor, kind: Kind) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        if let Kind::StudentT { nu } = kind {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::BadParams(format!("degrees of freedom {nu}")));
            }
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadParams("non-finite mean".into()));
        }
        let d = mean.len() as f64;
        let log_norm = match kind {
            Kind::Gaussian => -0.5 * (d * LN_2PI + cov.log_det()),
            Kind::StudentT { nu } => {
                ln_gamma(0.5 * (nu + d)) - ln_gamma(0.5 * nu) - 0.5 * d * (nu * PI).ln()
                    - 0.5 * cov.log_det()
            }
        };
        Ok(Self {
            mean,
            cov,
            kind,
            log_norm,
        })
    }

    pub fn gaussian(mean: Vec<f64>, cov: CovarianceFactor) -> Result<Self> {
        Self::new(mean, cov, Kind::Gaussian)
    }

    pub fn student(mean: Vec<f64>, cov: CovarianceFactor, nu: f64) -> Result<Self> {
        Self::new(mean, cov, Kind::StudentT { nu })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &CovarianceFactor {
        &self.cov
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Same location and scale, different family.
    pub fn with_kind(&self, kind: Kind) -> Result<Self> {
        Self::new(self.mean.clone(), self.cov.clone(), kind)
    }

    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        self.cov.mahalanobis_sq(x, &self.mean)
    }

    /// Log-density given a precomputed Mahalanobis distance.
    #[inline]
    pub fn log_pdf_from_mahalanobis(&self, m: f64) -> f64 {
        match self.kind {
            Kind::Gaussian => self.log_norm - 0.5 * m,
            Kind::StudentT { nu } => {
                let d = self.mean.len() as f64;
                self.log_norm - 0.5 * (nu + d) * (m / nu).ln_1p()
            }
        }
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.log_pdf_from_mahalanobis(self.mahalanobis_sq(x))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = vec![0.0; d];
        self.cov.mul_vec(&z, &mut out);
        let stretch = match self.kind {
            Kind::Gaussian => 1.0,
            Kind::StudentT { nu } => {
                let g: f64 = ChiSquared::new(nu)
                    .expect("degrees of freedom validated at construction")
                    .sample(rng);
                (nu / g).sqrt()
            }
        };
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o = m + stretch * *o;
        }
        out
    }
}

fn check_dim(x: &[f64], comp: &MixtureComponent) -> Result<()> {
    if x.len() != comp.dim() {
        return Err(Error::DimensionMismatch {
            expected: comp.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Multivariate normal log-density. The component must be Gaussian.
pub fn gauss_logpdf(x: &[f64], comp: &MixtureComponent) -> Result<f64> {
    check_dim(x, comp)?;
    if comp.kind() != Kind::Gaussian {
        return Err(Error::BadParams("expected a Gaussian component".into()));
    }
    Ok(comp.log_pdf(x))
}

/// Multivariate Student-t log-density. The component must be Student-t.
pub fn student_logpdf(x: &[f64], comp: &MixtureComponent) -> Result<f64> {
    check_dim(x, comp)?;
    if !matches!(comp.kind(), Kind::StudentT { .. }) {
        return Err(Error::BadParams("expected a Student-t component".into()));
    }
    Ok(comp.log_pdf(x))
}

pub fn gauss_sample<R: Rng + ?Sized>(comp: &MixtureComponent, rng: &mut R) -> Vec<f64> {
    debug_assert_eq!(comp.kind(), Kind::Gaussian);
    comp.sample(rng)
}

pub fn student_sample<R: Rng + ?Sized>(comp: &MixtureComponent, rng: &mut R) -> Vec<f64> {
    debug_assert!(matches!(comp.kind(), Kind::StudentT { .. }));
    comp.sample(rng)
}

/// Log-density of `loc + scale·ln Y`, `Y ~ Gamma(shape, 1)`:
/// `shape·z − eᶻ − ln Γ(shape) − ln scale` with `z = (x − loc)/scale`.
///
/// Unit shape puts the mode at `loc`. Overflow of `eᶻ` yields `−∞`.
pub fn loggamma_logpdf(x: f64, loc: f64, scale: f64, shape: f64) -> f64 {
    let z = (x - loc) / scale;
    shape * z - z.exp() - ln_gamma(shape) - scale.ln()
}

/// `ln Σ exp(v)`, returning `−∞` for an empty or all-`−∞` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `KL(p ‖ q)` between two Gaussians.
pub fn gauss_kl(p: &MixtureComponent, q: &MixtureComponent) -> f64 {
    debug_assert_eq!(p.dim(), q.dim());
    let d = p.dim() as f64;
    let tr = q.cov().trace_inv_times(p.cov());
    let m = q.cov().mahalanobis_sq(p.mean(), q.mean());
    (0.5 * (tr + m - d + q.cov().log_det() - p.cov().log_det())).max(0.0)
}

/// Weighted mixture of components sharing dimension and family.
///
/// Weights are kept normalized. Components with zero weight are "dead": they
/// stay in place so that indices remain stable, but are never evaluated or
/// sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDensity {
    components: Vec<MixtureComponent>,
    weights: Vec<f64>,
}

impl MixtureDensity {
    /// Normalizes `weights` to unit sum.
    pub fn new(components: Vec<MixtureComponent>, weights: Vec<f64>) -> Result<Self> {
        Self::validate(&components, &weights)?;
        let total: f64 = weights.iter().sum();
        let weights = if total == 1.0 {
            weights
        } else {
            weights.into_iter().map(|w| w / total).collect()
        };
        Ok(Self {
            components,
            weights,
        })
    }

    /// Every weight is exactly `1/K`.
    pub fn equal_weights(components: Vec<MixtureComponent>) -> Result<Self> {
        let k = components.len();
        let weights = vec![1.0 / k as f64; k];
        Self::validate(&components, &weights)?;
        Ok(Self { components, weights })
    }

    /// Accepts weights only if they already sum to one within `1e-12`; keeps
    /// them bit-for-bit.
    pub fn from_normalized(components: Vec<MixtureComponent>, weights: Vec<f64>) -> Result<Self> {
        Self::validate(&components, &weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadParams(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            components,
            weights,
        })
    }

    fn validate(components: &[MixtureComponent], weights: &[f64]) -> Result<()> {
        if components.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        let first = components.first().ok_or(Error::AllWeightsZero)?;
        for c in components {
            if c.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    got: c.dim(),
                });
            }
            if c.kind() != first.kind() {
                return Err(Error::MixedKinds);
            }
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidWeight(w));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::AllWeightsZero);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn kind(&self) -> Kind {
        self.components[0].kind()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn live_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// Iterator over `(index, weight, component)` of live components.
    pub fn live(&self) -> impl Iterator<Item = (usize, f64, &MixtureComponent)> {
        self.weights
            .iter()
            .zip(&self.components)
            .enumerate()
            .filter(|(_, (w, _))| **w > 0.0)
            .map(|(i, (w, c))| (i, *w, c))
    }

    /// Only the live components, renormalized.
    pub fn without_dead(&self) -> Self {
        let (components, weights) = self.live().map(|(_, w, c)| (c.clone(), w)).unzip();
        Self::new(components, weights).expect("a valid mixture has a live component")
    }

    /// Same components, all weights equal.
    pub fn with_equal_weights(&self) -> Self {
        Self::equal_weights(self.components.clone()).expect("non-empty mixture")
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self.live().map(|(_, w, c)| w.ln() + c.log_pdf(x)).collect();
        log_sum_exp(&terms)
    }

    pub fn sampler(&self) -> MixtureSampler<'_> {
        MixtureSampler {
            mixture: self,
            index: WeightedIndex::new(&self.weights).expect("validated weights"),
        }
    }
}

/// Mixture log-density; dead components are skipped.
pub fn mixture_logpdf(q: &MixtureDensity, x: &[f64]) -> Result<f64> {
    if x.len() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: x.len(),
        });
    }
    Ok(q.log_pdf(x))
}

/// Draw one point and the index of the component it came from.
pub fn mixture_sample<R: Rng + ?Sized>(q: &MixtureDensity, rng: &mut R) -> (Vec<f64>, usize) {
    q.sampler().sample(rng)
}

/// Categorical component choice with the cumulative table built once.
pub struct MixtureSampler<'a> {
    mixture: &'a MixtureDensity,
    index: WeightedIndex<f64>,
}

impl MixtureSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, usize) {
        let j = self.index.sample(rng);
        (self.mixture.components[j].sample(rng), j)
    }
}
