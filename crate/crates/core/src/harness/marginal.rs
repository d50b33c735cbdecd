use serde::Serialize;

use crate::error::{Error, Result};
use crate::pmc::WeightedSampleSet;

/// Weighted histogram over one or two parameters, normalized to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub dims: Vec<usize>,
    /// Bin edges per histogram axis.
    pub edges: Vec<Vec<f64>>,
    /// Row-major densities; the last axis varies fastest.
    pub density: Vec<f64>,
}

impl Histogram {
    /// Σ density × cell volume.
    pub fn mass(&self) -> f64 {
        let widths: Vec<Vec<f64>> = self.edges.iter().map(|e| e.windows(2).map(|w| w[1] - w[0]).collect()).collect();
        let mut total = 0.0;
        for (idx, d) in self.density.iter().enumerate() {
            total += d * self.cell_volume(idx, &widths);
        }
        total
    }

    fn cell_volume(&self, idx: usize, widths: &[Vec<f64>]) -> f64 {
        match widths {
            [w] => w[idx],
            [wx, wy] => wx[idx / wy.len()] * wy[idx % wy.len()],
            _ => unreachable!("histograms are 1- or 2-dimensional"),
        }
    }

    /// 1D: `lo,hi,density`; 2D: `x_lo,x_hi,y_lo,y_hi,density`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match self.edges.as_slice() {
            [ex] => {
                w.write_record(["lo", "hi", "density"])?;
                for (i, d) in self.density.iter().enumerate() {
                    w.write_record([ex[i].to_string(), ex[i + 1].to_string(), d.to_string()])?;
                }
            }
            [ex, ey] => {
                w.write_record(["x_lo", "x_hi", "y_lo", "y_hi", "density"])?;
                let ny = ey.len() - 1;
                for (idx, d) in self.density.iter().enumerate() {
                    let (i, j) = (idx / ny, idx % ny);
                    w.write_record([
                        ex[i].to_string(),
                        ex[i + 1].to_string(),
                        ey[j].to_string(),
                        ey[j + 1].to_string(),
                        d.to_string(),
                    ])?;
                }
            }
            _ => unreachable!("histograms are 1- or 2-dimensional"),
        }
        w.flush()?;
        Ok(())
    }
}

fn bin_of(x: f64, lo: f64, hi: f64, bins: usize) -> Option<usize> {
    if !(lo..=hi).contains(&x) {
        return None;
    }
    Some((((x - lo) / (hi - lo)) * bins as f64).floor().min((bins - 1) as f64) as usize)
}

fn data_range(s: &WeightedSampleSet, dim: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..s.len() {
        if s.weights[i] > 0.0 {
            let x = s.point(i)[dim];
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Importance-weighted histogram of parameters `dims` (0-based, one or two).
/// Axis ranges default to the range of samples with positive weight; samples
/// outside an explicit range are ignored before normalization.
pub fn emit_marginal(
    s: &WeightedSampleSet,
    dims: &[usize],
    bins: usize,
    ranges: Option<&[(f64, f64)]>,
) -> Result<Histogram> {
    if dims.is_empty() || dims.len() > 2 || dims.iter().any(|&j| j >= s.dim) {
        return Err(Error::BadParams(format!("marginal needs 1 or 2 dims below {}", s.dim)));
    }
    if bins == 0 {
        return Err(Error::BadParams("bins must be positive".into()));
    }
    let ranges: Vec<(f64, f64)> = match ranges {
        Some(r) if r.len() == dims.len() && r.iter().all(|(a, b)| a < b) => r.to_vec(),
        Some(_) => return Err(Error::BadParams("one increasing range per marginal dim".into())),
        None => dims.iter().map(|&j| data_range(s, j)).collect(),
    };
    let edges: Vec<Vec<f64>> = ranges
        .iter()
        .map(|&(lo, hi)| (0..=bins).map(|b| lo + (hi - lo) * b as f64 / bins as f64).collect())
        .collect();
    let mut mass = vec![0.0; bins.pow(dims.len() as u32)];
    for i in 0..s.len() {
        let w = s.weights[i];
        if w == 0.0 {
            continue;
        }
        let x = s.point(i);
        let mut idx = 0;
        let mut inside = true;
        for (&j, &(lo, hi)) in dims.iter().zip(&ranges) {
            match bin_of(x[j], lo, hi, bins) {
                Some(b) => idx = idx * bins + b,
                None => inside = false,
            }
        }
        if inside {
            mass[idx] += w;
        }
    }
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroWeights);
    }
    let cell: f64 = ranges.iter().map(|(lo, hi)| (hi - lo) / bins as f64).product();
    let density = mass.iter().map(|m| m / total / cell).collect();
    Ok(Histogram {
        dims: dims.to_vec(),
        edges,
        density,
    })
}
