use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Tensor;

/// Glorot-uniform `[fan_in, fan_out]` weight matrix.
pub fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit))
}

/// Row vector of standard-normal draws scaled by `std`.
pub fn normal_row<R: Rng + ?Sized>(rng: &mut R, n: usize, std: f64) -> Tensor {
    Tensor::from_fn(1, n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * std
    })
}

/// `[rows, cols]` standard-normal matrix scaled by `std`.
pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * std
    })
}
