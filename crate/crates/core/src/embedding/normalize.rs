use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-landmark, per-feature standardization fitted on training samples.
///
/// Raw landmark coordinates vary far more across landmarks than within one
/// landmark across samples; standardizing each landmark separately exposes
/// the within-landmark variation that carries class information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    /// `n x d`
    pub mean: Array2<f64>,
    /// `n x d`, floored to avoid division by ~0
    pub scale: Array2<f64>,
}

const MIN_SCALE: f64 = 1e-6;

impl FeatureNormalizer {
    /// Fits on a list of `n x d` per-landmark feature matrices.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a Array2<f64>>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum: Option<Array2<f64>> = None;
        let mut sum_sq: Option<Array2<f64>> = None;
        for m in samples {
            match (&mut sum, &mut sum_sq) {
                (Some(s), Some(q)) => {
                    if s.dim() != m.dim() {
                        return Err(Error::invalid("feature matrices differ in shape"));
                    }
                    *s += m;
                    *q += &(m * m);
                }
                _ => {
                    sum = Some(m.clone());
                    sum_sq = Some(m * m);
                }
            }
            count += 1;
        }
        let (sum, sum_sq) = match (sum, sum_sq) {
            (Some(s), Some(q)) => (s, q),
            _ => return Err(Error::invalid("cannot fit a normalizer on zero samples")),
        };
        let c = count as f64;
        let mean = sum / c;
        let var = sum_sq / c - &mean * &mean;
        let scale = var.mapv(|v| v.max(0.0).sqrt().max(MIN_SCALE));
        Ok(Self { mean, scale })
    }

    /// Like [`fit`](Self::fit) but with one mean and scale per feature,
    /// pooled over all landmarks, so the layout between landmarks survives.
    pub fn fit_pooled<'a>(samples: impl IntoIterator<Item = &'a Array2<f64>>) -> Result<Self> {
        let per = Self::fit(samples)?;
        let (n, d) = per.mean.dim();
        let mut mean = Array2::zeros((n, d));
        let mut scale = Array2::zeros((n, d));
        for j in 0..d {
            let m = per.mean.column(j).mean().unwrap_or(0.0);
            // Total variance = mean within-landmark variance + variance of landmark means.
            let var = per
                .mean
                .column(j)
                .iter()
                .zip(per.scale.column(j))
                .map(|(&mu, &s)| s * s + (mu - m) * (mu - m))
                .sum::<f64>()
                / n as f64;
            mean.column_mut(j).fill(m);
            scale.column_mut(j).fill(var.sqrt().max(MIN_SCALE));
        }
        Ok(Self { mean, scale })
    }

    pub fn identity(n: usize, d: usize) -> Self {
        Self {
            mean: Array2::zeros((n, d)),
            scale: Array2::ones((n, d)),
        }
    }

    pub fn apply(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.dim() != self.mean.dim() {
            return Err(Error::invalid(format!(
                "normalizer fitted for {:?}, got {:?}",
                self.mean.dim(),
                features.dim()
            )));
        }
        Ok((features - &self.mean) / &self.scale)
    }

    pub fn dim(&self) -> usize {
        self.mean.len_of(Axis(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardizes_each_cell() {
        let a = array![[0.0, 1.0], [10.0, 5.0]];
        let b = array![[2.0, 1.0], [14.0, 5.0]];
        let norm = FeatureNormalizer::fit([&a, &b]).unwrap();
        let za = norm.apply(&a).unwrap();
        assert_eq!(za[[0, 0]], -1.0);
        assert_eq!(za[[1, 0]], -1.0);
        // zero variance column stays finite
        assert_eq!(za[[0, 1]], 0.0);
    }

    #[test]
    fn empty_fit_rejected() {
        assert!(FeatureNormalizer::fit(std::iter::empty()).is_err());
    }
}
