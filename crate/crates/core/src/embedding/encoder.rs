use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Patch;
use crate::error::{Error, Result};
use crate::neural::{Parameters, ParamVisitor, ParamVisitorMut};
use crate::seed;

/// Anything that turns a patch into a fixed-length vector.
pub trait PatchEncode {
    fn output_dim(&self) -> usize;
    fn encode(&self, patch: &Patch) -> Result<Vec<f64>>;
}

/// Configuration-level choice of patch encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EncoderKind {
    Flatten,
    RandomProjection { dim: usize, seed: u64 },
    TinyConv { filters: usize, seed: u64 },
}

impl Default for EncoderKind {
    fn default() -> Self {
        EncoderKind::RandomProjection { dim: 64, seed: 17 }
    }
}

impl EncoderKind {
    pub fn build(&self, patch_size: usize) -> PatchEncoder {
        match *self {
            EncoderKind::Flatten => PatchEncoder::flatten(patch_size),
            EncoderKind::RandomProjection { dim, seed } => {
                PatchEncoder::random_projection(patch_size, dim, seed)
            }
            EncoderKind::TinyConv { filters, seed } => {
                PatchEncoder::TinyConv(TinyConv::new(patch_size, filters, seed))
            }
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, EncoderKind::TinyConv { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatchEncoder {
    /// Raw pixels, `d = size²`.
    Flatten { size: usize },
    /// Fixed Gaussian projection `R · vec(patch)`, `R` scaled by `1/size`.
    RandomProjection { size: usize, matrix: Array2<f64> },
    TinyConv(TinyConv),
}

impl PatchEncoder {
    pub fn flatten(size: usize) -> Self {
        PatchEncoder::Flatten { size }
    }

    pub fn random_projection(size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed::stream(seed, "random-projection"));
        let scale = 1.0 / size as f64;
        let matrix = Array2::from_shape_simple_fn((dim, size * size), || {
            let z: f64 = rng.sample(StandardNormal);
            z * scale
        });
        PatchEncoder::RandomProjection { size, matrix }
    }

    fn input_size(&self) -> usize {
        match self {
            PatchEncoder::Flatten { size } | PatchEncoder::RandomProjection { size, .. } => *size,
            PatchEncoder::TinyConv(c) => c.patch_size,
        }
    }
}

impl PatchEncode for PatchEncoder {
    fn output_dim(&self) -> usize {
        match self {
            PatchEncoder::Flatten { size } => size * size,
            PatchEncoder::RandomProjection { matrix, .. } => matrix.nrows(),
            PatchEncoder::TinyConv(c) => c.filters(),
        }
    }

    fn encode(&self, patch: &Patch) -> Result<Vec<f64>> {
        if patch.size() != self.input_size() {
            return Err(Error::invalid(format!(
                "encoder expects {0}x{0} patches, got {1}x{1}",
                self.input_size(),
                patch.size()
            )));
        }
        Ok(match self {
            PatchEncoder::Flatten { .. } => patch.pixels().to_vec(),
            PatchEncoder::RandomProjection { matrix, .. } => {
                matrix.dot(&ndarray::ArrayView1::from(patch.pixels())).to_vec()
            }
            PatchEncoder::TinyConv(c) => c.forward(patch).0.to_vec(),
        })
    }
}

/// Trainable 3x3 convolution bank followed by `tanh` and global mean pooling.
///
/// Output dimension equals the number of filters.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyConv {
    pub patch_size: usize,
    /// `filters x 9`, kernel taps row-major.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Activations kept from [`TinyConv::forward`], `filters x positions`.
#[derive(Debug, Clone)]
pub struct TinyConvCache {
    act: Array2<f64>,
}

impl TinyConv {
    pub fn new(patch_size: usize, filters: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed::stream(seed, "tiny-conv"));
        let bound = 1.0 / 3.0;
        Self {
            patch_size,
            weights: Array2::from_shape_simple_fn((filters, 9), || rng.random_range(-bound..bound)),
            bias: Array1::zeros(filters),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            patch_size: self.patch_size,
            weights: Array2::zeros(self.weights.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn filters(&self) -> usize {
        self.weights.nrows()
    }

    fn out_side(&self) -> usize {
        self.patch_size - 2
    }

    pub fn forward(&self, patch: &Patch) -> (Array1<f64>, TinyConvCache) {
        let side = self.out_side();
        let positions = side * side;
        let mut act = Array2::zeros((self.filters(), positions));
        let mut out = Array1::zeros(self.filters());
        for f in 0..self.filters() {
            let w = self.weights.row(f);
            let mut total = 0.0;
            for r in 0..side {
                for c in 0..side {
                    let mut z = self.bias[f];
                    for kr in 0..3 {
                        for kc in 0..3 {
                            z += w[kr * 3 + kc] * patch.at(r + kr, c + kc);
                        }
                    }
                    let a = z.tanh();
                    act[[f, r * side + c]] = a;
                    total += a;
                }
            }
            out[f] = total / positions as f64;
        }
        (out, TinyConvCache { act })
    }

    /// Accumulates parameter gradients for upstream gradient `dout`.
    pub fn backward(&self, patch: &Patch, cache: &TinyConvCache, dout: &[f64], grads: &mut TinyConv) {
        let side = self.out_side();
        let inv = 1.0 / (side * side) as f64;
        for (f, &d) in dout.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for r in 0..side {
                for c in 0..side {
                    let a = cache.act[[f, r * side + c]];
                    let dz = d * inv * (1.0 - a * a);
                    grads.bias[f] += dz;
                    for kr in 0..3 {
                        for kc in 0..3 {
                            grads.weights[[f, kr * 3 + kc]] += dz * patch.at(r + kr, c + kc);
                        }
                    }
                }
            }
        }
    }
}

impl Parameters for TinyConv {
    fn visit(&self, prefix: &str, f: &mut ParamVisitor<'_>) {
        f(&format!("{prefix}.weights"), self.weights.shape(), self.weights.as_slice().unwrap());
        f(&format!("{prefix}.bias"), self.bias.shape(), self.bias.as_slice().unwrap());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut ParamVisitorMut<'_>) {
        f(&format!("{prefix}.weights"), self.weights.as_slice_mut().unwrap());
        f(&format!("{prefix}.bias"), self.bias.as_slice_mut().unwrap());
    }
}
