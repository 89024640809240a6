use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Seeded uniform initializer, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: crate::seed::rng(seed),
        }
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Array2::from_shape_simple_fn((rows, cols), || self.rng.random_range(-bound..=bound))
    }

    pub fn vector(&mut self, len: usize, fan_in: usize) -> Array1<f64> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Array1::from_shape_simple_fn(len, || self.rng.random_range(-bound..=bound))
    }
}
