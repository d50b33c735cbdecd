use crate::error::{Error, Result};

/// Relative size of the diagonal jitter added on the single retry.
const JITTER: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` of a covariance matrix `Σ = L·Lᵀ`,
/// stored row-major as a dense `dim × dim` array with zeros above the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFactor {
    dim: usize,
    lower: Vec<f64>,
    log_det: f64,
}

/// Factor a symmetric matrix (row-major, `dim × dim`).
///
/// The input is symmetrized as `½(A + Aᵀ)`. If a pivot is not strictly positive
/// the factorization is retried once with `1e-10·mean(diag)` added to the
/// diagonal before giving up with [`Error::NotPositiveDefinite`].
pub fn chol_decompose(sigma: &[f64], dim: usize) -> Result<CovarianceFactor> {
    CovarianceFactor::from_covariance(sigma, dim)
}

impl CovarianceFactor {
    pub fn from_covariance(sigma: &[f64], dim: usize) -> Result<Self> {
        if sigma.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: sigma.len(),
            });
        }
        let mut sym = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                sym[i * dim + j] = 0.5 * (sigma[i * dim + j] + sigma[j * dim + i]);
            }
        }
        match cholesky(&sym, dim) {
            Ok(lower) => Ok(Self::from_lower_unchecked(lower, dim)),
            Err(first) => {
                let mean_diag = (0..dim).map(|i| sym[i * dim + i]).sum::<f64>() / dim as f64;
                if !(mean_diag.is_finite() && mean_diag > 0.0) {
                    return Err(first);
                }
                for i in 0..dim {
                    sym[i * dim + i] += JITTER * mean_diag;
                }
                cholesky(&sym, dim).map(|lower| Self::from_lower_unchecked(lower, dim))
            }
        }
    }

    /// Build from an explicit lower-triangular factor. Entries above the diagonal
    /// are ignored; the diagonal must be strictly positive and finite.
    pub fn from_lower(mut lower: Vec<f64>, dim: usize) -> Result<Self> {
        if lower.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: lower.len(),
            });
        }
        for i in 0..dim {
            let v = lower[i * dim + i];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: v });
            }
            for j in i + 1..dim {
                lower[i * dim + j] = 0.0;
            }
        }
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadParams("non-finite Cholesky entry".into()));
        }
        Ok(Self::from_lower_unchecked(lower, dim))
    }

    fn from_lower_unchecked(lower: Vec<f64>, dim: usize) -> Self {
        let log_det = 2.0 * (0..dim).map(|i| lower[i * dim + i].ln()).sum::<f64>();
        Self {
            dim,
            lower,
            log_det,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut lower = vec![0.0; dim * dim];
        for i in 0..dim {
            lower[i * dim + i] = 1.0;
        }
        Self::from_lower_unchecked(lower, dim)
    }

    /// Factor of `diag(variances)`.
    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        let dim = variances.len();
        let mut lower = vec![0.0; dim * dim];
        for (i, &v) in variances.iter().enumerate() {
            lower[i * dim + i] = v.sqrt();
        }
        Self::from_lower(lower, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `dim × dim` lower triangle.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// `ln det Σ`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Reconstructed `Σ = L·Lᵀ`, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.entry(i, k) * self.entry(j, k)).sum();
                out[i * d + j] = s;
                out[j * d + i] = s;
            }
        }
        out
    }

    /// Diagonal of `Σ`.
    pub fn variances(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..=i).map(|k| self.entry(i, k).powi(2)).sum())
            .collect()
    }

    /// `Σ` scaled by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = factor.sqrt();
        let lower = self.lower.iter().map(|v| v * s).collect();
        Self::from_lower_unchecked(lower, self.dim)
    }

    /// Solve `L·y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.lower[i * d..i * d + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, y)| l * y).sum();
            b[i] = (b[i] - s) / self.lower[i * d + i];
        }
    }

    /// `(x − μ)ᵀ Σ⁻¹ (x − μ)`.
    pub fn mahalanobis_sq(&self, x: &[f64], mean: &[f64]) -> f64 {
        let mut y: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
        self.solve_lower_in_place(&mut y);
        y.iter().map(|v| v * v).sum()
    }

    /// `out = L·z`.
    pub fn mul_vec(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            out[i] = self.lower[i * d..i * d + i + 1]
                .iter()
                .zip(z)
                .map(|(l, v)| l * v)
                .sum();
        }
    }

    /// `tr(Σ_self⁻¹ Σ_other) = ‖L_self⁻¹ L_other‖²_F`.
    pub fn trace_inv_times(&self, other: &CovarianceFactor) -> f64 {
        let d = self.dim;
        let mut col = vec![0.0; d];
        let mut total = 0.0;
        for j in 0..d {
            for i in 0..d {
                col[i] = other.entry(i, j);
            }
            // column j of L_other is zero above row j; forward substitution still
            // runs over the full length.
            self.solve_lower_in_place(&mut col);
            total += col.iter().map(|v| v * v).sum::<f64>();
        }
        total
    }
}

fn cholesky(a: &[f64], dim: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for j in 0..dim {
        let mut diag = a[j * dim + j];
        for k in 0..j {
            diag -= l[j * dim + k] * l[j * dim + k];
        }
        if !(diag > 0.0 && diag.is_finite()) {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[j * dim + j] = ljj;
        for i in j + 1..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = s / ljj;
        }
    }
    Ok(l)
}
