//! Benchmark targets on hyperrectangular uniform priors.
//!
//! Two families ship with analytic evidence: a pair of Gaussian shells and a
//! four-mode product of LogGamma and normal factors with heavy tails.

use std::f64::consts::{LN_2, PI};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::densities::{log_sum_exp, loggamma_logpdf};
use crate::error::{Error, Result};
use crate::quad;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A log-density on a box. Points outside the box have log-density `−∞`.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn log_density(&self, x: &[f64]) -> f64;

    /// Integral of `exp(log_density)` when known in closed form.
    fn evidence(&self) -> Option<f64> {
        None
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower().iter().zip(self.upper()))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// Two Gaussian shells of common radius and width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub dim: usize,
    pub centers: [Vec<f64>; 2],
    pub radius: f64,
    pub width: f64,
    pub half_width: f64,
}

impl ShellSpec {
    /// Centers at `(±3.5, 0, …, 0)`, `r = 2`, `w = 0.1`, box `[−6, 6]^d`.
    pub fn standard(dim: usize) -> Self {
        let center = |x: f64| {
            let mut c = vec![0.0; dim];
            if let Some(first) = c.first_mut() {
                *first = x;
            }
            c
        };
        Self {
            dim,
            centers: [center(3.5), center(-3.5)],
            radius: 2.0,
            width: 0.1,
            half_width: 6.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::BadParams("shell dimension must be positive".into()));
        }
        if !(self.radius > 0.0 && self.width > 0.0 && self.half_width > 0.0) {
            return Err(Error::BadParams(
                "shell radius, width and box half-width must be positive".into(),
            ));
        }
        if self.centers.iter().any(|c| c.len() != self.dim) {
            return Err(Error::BadParams("shell center has wrong dimension".into()));
        }
        Ok(())
    }
}

fn log_shell(theta: &[f64], center: &[f64], radius: f64, width: f64) -> f64 {
    let dist = theta
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    -(dist - radius).powi(2) / (2.0 * width * width) - LN_SQRT_2PI - width.ln()
}

/// `ln[½·shell(θ|c₁) + ½·shell(θ|c₂)]`.
pub fn shell_log_likelihood(theta: &[f64], spec: &ShellSpec) -> f64 {
    let terms = [
        -LN_2 + log_shell(theta, &spec.centers[0], spec.radius, spec.width),
        -LN_2 + log_shell(theta, &spec.centers[1], spec.radius, spec.width),
    ];
    log_sum_exp(&terms)
}

/// Evidence of the shell target with the likelihood integrated over a ball of
/// radius `rho_max` around one center and the prior normalized as `(2·rho_max)^d`.
pub fn shell_evidence(spec: &ShellSpec, rho_max: f64) -> f64 {
    let d = spec.dim as f64;
    let (r, w) = (spec.radius, spec.width);
    debug_assert!(rho_max >= r + 10.0 * w);
    let radial = quad::integrate(
        |rho: f64| {
            if rho <= 0.0 {
                0.0
            } else {
                ((d - 1.0) * rho.ln() - (rho - r).powi(2) / (2.0 * w * w)).exp()
            }
        },
        0.0,
        rho_max,
        1e-12,
        0.0,
    );
    let log_prefactor = 0.5 * LN_2 + 0.5 * (d - 1.0) * PI.ln()
        - ln_gamma(0.5 * d)
        - d * (2.0 * rho_max).ln()
        - w.ln();
    log_prefactor.exp() * radial
}

fn log_normal(x: f64, mean: f64) -> f64 {
    -0.5 * (x - mean).powi(2) - LN_SQRT_2PI
}

/// Per-coordinate factor of the heavy-tail likelihood; `index` is zero-based.
pub fn heavytail_factor(x: f64, index: usize, dim: usize) -> f64 {
    let loggamma_dims = (dim + 2) / 2;
    match index {
        0 => log_sum_exp(&[
            -LN_2 + loggamma_logpdf(x, 10.0, 1.0, 1.0),
            -LN_2 + loggamma_logpdf(x, -10.0, 1.0, 1.0),
        ]),
        1 => log_sum_exp(&[-LN_2 + log_normal(x, 10.0), -LN_2 + log_normal(x, -10.0)]),
        i if i < loggamma_dims => loggamma_logpdf(x, 10.0, 1.0, 1.0),
        _ => log_normal(x, 10.0),
    }
}

/// Product of the per-coordinate factors: four modes from the first two
/// coordinates, LogGamma factors up to coordinate `(d+2)/2`, normals after.
pub fn heavytail_log_likelihood(theta: &[f64], dim: usize) -> f64 {
    debug_assert_eq!(theta.len(), dim);
    theta
        .iter()
        .enumerate()
        .map(|(i, &x)| heavytail_factor(x, i, dim))
        .sum()
}

/// `60^(−d)`: the likelihood is normalized, the prior is uniform on `[−30, 30]^d`.
pub fn heavytail_evidence(dim: usize) -> f64 {
    60f64.powi(-(dim as i32))
}

/// Centers of the four modes in the first two coordinates.
pub const HEAVYTAIL_MODES: [[f64; 2]; 4] = [[10.0, 10.0], [10.0, -10.0], [-10.0, 10.0], [-10.0, -10.0]];

/// Configurable selection of a built-in target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Shells {
        dim: usize,
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        width: Option<f64>,
        #[serde(default)]
        centers: Option<[Vec<f64>; 2]>,
        #[serde(default)]
        half_width: Option<f64>,
    },
    Tails {
        dim: usize,
    },
}

impl TargetSpec {
    pub fn shells(dim: usize) -> Self {
        Self::Shells {
            dim,
            radius: None,
            width: None,
            centers: None,
            half_width: None,
        }
    }

    pub fn tails(dim: usize) -> Self {
        Self::Tails { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Shells { dim, .. } | Self::Tails { dim } => *dim,
        }
    }

    pub fn shell_spec(&self) -> Option<ShellSpec> {
        match self {
            Self::Shells {
                dim,
                radius,
                width,
                centers,
                half_width,
            } => {
                let mut s = ShellSpec::standard(*dim);
                if let Some(r) = radius {
                    s.radius = *r;
                }
                if let Some(w) = width {
                    s.width = *w;
                }
                if let Some(c) = centers {
                    s.centers = c.clone();
                }
                if let Some(h) = half_width {
                    s.half_width = *h;
                }
                Some(s)
            }
            Self::Tails { .. } => None,
        }
    }
}

type LogFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Likelihood {
    Shells(ShellSpec),
    Tails,
    Custom(LogFn),
}

/// Likelihood times uniform prior on a box.
#[derive(Clone)]
pub struct TargetDensity {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    log_prior: f64,
    likelihood: Likelihood,
    evidence: Option<f64>,
}

impl std::fmt::Debug for TargetDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.likelihood {
            Likelihood::Shells(_) => "shells",
            Likelihood::Tails => "tails",
            Likelihood::Custom(_) => "custom",
        };
        f.debug_struct("TargetDensity")
            .field("kind", &kind)
            .field("dim", &self.dim)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("evidence", &self.evidence)
            .finish()
    }
}

fn uniform_log_prior(lower: &[f64], upper: &[f64]) -> Result<f64> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(Error::BadParams("box bounds must be non-empty and of equal length".into()));
    }
    if lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
        return Err(Error::BadParams("box lower bound must be below upper bound".into()));
    }
    Ok(-lower.iter().zip(upper).map(|(a, b)| (b - a).ln()).sum::<f64>())
}

impl TargetDensity {
    pub fn shells(spec: ShellSpec) -> Result<Self> {
        spec.validate()?;
        let lower = vec![-spec.half_width; spec.dim];
        let upper = vec![spec.half_width; spec.dim];
        let log_prior = uniform_log_prior(&lower, &upper)?;
        let evidence = (spec.half_width >= spec.radius + 10.0 * spec.width)
            .then(|| shell_evidence(&spec, spec.half_width));
        Ok(Self {
            dim: spec.dim,
            lower,
            upper,
            log_prior,
            likelihood: Likelihood::Shells(spec),
            evidence,
        })
    }

    pub fn tails(dim: usize) -> Result<Self> {
        if dim < 2 || !dim.is_multiple_of(2) {
            return Err(Error::BadParams(format!(
                "heavy-tail target needs an even dimension >= 2, got {dim}"
            )));
        }
        let lower = vec![-30.0; dim];
        let upper = vec![30.0; dim];
        let log_prior = uniform_log_prior(&lower, &upper)?;
        Ok(Self {
            dim,
            lower,
            upper,
            log_prior,
            likelihood: Likelihood::Tails,
            evidence: Some(heavytail_evidence(dim)),
        })
    }

    /// User log-likelihood on a box with uniform prior; no evidence oracle.
    pub fn custom<F>(lower: Vec<f64>, upper: Vec<f64>, log_likelihood: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let log_prior = uniform_log_prior(&lower, &upper)?;
        Ok(Self {
            dim: lower.len(),
            lower,
            upper,
            log_prior,
            likelihood: Likelihood::Custom(Arc::new(log_likelihood)),
            evidence: None,
        })
    }

    pub fn log_prior(&self) -> f64 {
        self.log_prior
    }

    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        match &self.likelihood {
            Likelihood::Shells(spec) => shell_log_likelihood(x, spec),
            Likelihood::Tails => heavytail_log_likelihood(x, self.dim),
            Likelihood::Custom(f) => f(x),
        }
    }

    pub fn is_tails(&self) -> bool {
        matches!(self.likelihood, Likelihood::Tails)
    }
}

impl Target for TargetDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return f64::NEG_INFINITY;
        }
        self.log_likelihood(x) + self.log_prior
    }

    fn evidence(&self) -> Option<f64> {
        self.evidence
    }
}

pub fn make_target(spec: &TargetSpec) -> Result<TargetDensity> {
    match spec {
        TargetSpec::Shells { .. } => TargetDensity::shells(spec.shell_spec().expect("shell spec")),
        TargetSpec::Tails { dim } => TargetDensity::tails(*dim),
    }
}

/// Analytic evidence for a built-in target specification.
pub fn evidence_oracle(spec: &TargetSpec) -> Result<f64> {
    make_target(spec)?.evidence().ok_or(Error::NoOracle)
}

/// Wraps a target and counts every density evaluation.
pub struct CountingTarget<'a, T: Target + ?Sized> {
    inner: &'a T,
    calls: AtomicU64,
}

impl<'a, T: Target + ?Sized> CountingTarget<'a, T> {
    pub fn new(inner: &'a T) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<T: Target + ?Sized> Target for CountingTarget<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn lower(&self) -> &[f64] {
        self.inner.lower()
    }

    fn upper(&self) -> &[f64] {
        self.inner.upper()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.log_density(x)
    }

    fn evidence(&self) -> Option<f64> {
        self.inner.evidence()
    }
}
