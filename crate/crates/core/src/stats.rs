//! Sample moments over row-major point arrays.

/// Sample mean and covariance (denominator `n − 1`) of `n` points of dimension
/// `dim` stored row-major. Covariance is returned row-major `dim × dim`.
pub fn mean_and_covariance(points: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points.len() / dim;
    let mut mean = vec![0.0; dim];
    for p in points.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; dim * dim];
    for p in points.chunks_exact(dim) {
        for i in 0..dim {
            let di = p[i] - mean[i];
            for j in 0..=i {
                cov[i * dim + j] += di * (p[j] - mean[j]);
            }
        }
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    for i in 0..dim {
        for j in 0..=i {
            let v = cov[i * dim + j] / denom;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    (mean, cov)
}
