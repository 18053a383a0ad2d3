use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Replaces each gap with the mean of the nearest present values on either
/// side. Leading and trailing gaps copy their only neighbour.
pub fn fill_missing(series: &[Option<f64>]) -> Result<Vec<f64>> {
    let mut next = vec![None; series.len()];
    let mut seen = None;
    for (i, v) in series.iter().enumerate().rev() {
        if v.is_some() {
            seen = *v;
        }
        next[i] = seen;
    }
    if seen.is_none() {
        return Err(Error::Data("series has no present values to fill from".into()));
    }
    let mut prev = None;
    let mut out = Vec::with_capacity(series.len());
    for (i, v) in series.iter().enumerate() {
        let filled = match (*v, prev, next[i]) {
            (Some(x), _, _) => x,
            (None, Some(a), Some(b)) => (a + b) / 2.0,
            (None, Some(a), None) | (None, None, Some(a)) => a,
            (None, None, None) => unreachable!("at least one value is present"),
        };
        if v.is_some() {
            prev = *v;
        }
        out.push(filled);
    }
    Ok(out)
}

/// Z-score statistics fitted on a training segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    pub const IDENTITY: Normalizer = Normalizer { mean: 0.0, std: 1.0 };

    /// Population mean and standard deviation; a constant series gets `std = 1`.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("cannot fit normalizer on an empty series".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let std = if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 };
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn normalize_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.normalize(x)).collect()
    }

    pub fn denormalize_all(&self, zs: &[f64]) -> Vec<f64> {
        zs.iter().map(|&z| self.denormalize(z)).collect()
    }
}
