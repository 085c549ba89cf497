use chem::{DescriptorVec, NUM_DESCRIPTORS};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

pub const HIST_BINS: usize = 20;
/// Added to every bin count before normalizing.
pub const HIST_SMOOTHING: f64 = 1e-6;
/// Arbitrary normalization in `exp(−d²/FRECHET_SCALE)`.
pub const FRECHET_SCALE: f64 = 8.0;
const COV_RIDGE: f64 = 1e-6;

/// Smoothed, normalized histogram of `values` over `[lo, hi]`. A degenerate
/// range puts everything in the first bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut counts = [HIST_SMOOTHING; HIST_BINS];
    let width = hi - lo;
    for &v in values {
        let bin = if width > 0.0 {
            (((v - lo) / width * HIST_BINS as f64).floor().max(0.0) as usize).min(HIST_BINS - 1)
        } else {
            0
        };
        counts[bin] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

/// `Σ p ln(p/q)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(p, _)| **p > 0.0).map(|(p, q)| p * (p / q).ln()).sum()
}

/// Mean over descriptor dimensions of `exp(−KL(train ‖ generated))`, with
/// both histograms over the pooled range.
pub fn kl_div_score(generated: &[DescriptorVec], training: &[DescriptorVec]) -> Result<f64> {
    if generated.is_empty() || training.is_empty() {
        return Err(Error::invalid("KL score needs two non-empty sets"));
    }
    let mut score = 0.0;
    for d in 0..NUM_DESCRIPTORS {
        let g: Vec<f64> = generated.iter().map(|v| v.0[d]).collect();
        let t: Vec<f64> = training.iter().map(|v| v.0[d]).collect();
        let lo = g.iter().chain(&t).copied().fold(f64::INFINITY, f64::min);
        let hi = g.iter().chain(&t).copied().fold(f64::NEG_INFINITY, f64::max);
        score += (-kl_divergence(&histogram(&t, lo, hi), &histogram(&g, lo, hi))).exp();
    }
    Ok(score / NUM_DESCRIPTORS as f64)
}

fn moments(set: &[DescriptorVec]) -> (DVector<f64>, DMatrix<f64>) {
    let n = set.len() as f64;
    let mean = set.iter().fold(DVector::zeros(NUM_DESCRIPTORS), |acc, v| acc + DVector::from_column_slice(&v.0)) / n;
    let mut cov = DMatrix::zeros(NUM_DESCRIPTORS, NUM_DESCRIPTORS);
    for v in set {
        let c = DVector::from_column_slice(&v.0) - &mean;
        cov += &c * c.transpose();
    }
    cov /= n - 1.0;
    cov += DMatrix::identity(NUM_DESCRIPTORS, NUM_DESCRIPTORS) * COV_RIDGE;
    (mean, cov)
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// `‖m₁−m₂‖² + tr(C₁ + C₂ − 2(C₁C₂)^{1/2})`, the trace of the root taken as
/// `tr (C₁^{1/2} C₂ C₁^{1/2})^{1/2}`. Clamped at zero.
pub fn gaussian_frechet_sq(m1: &DVector<f64>, c1: &DMatrix<f64>, m2: &DVector<f64>, c2: &DMatrix<f64>) -> f64 {
    let s1 = sym_sqrt(c1);
    let inner = &s1 * c2 * &s1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let root_trace: f64 = SymmetricEigen::new(inner).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    ((m1 - m2).norm_squared() + c1.trace() + c2.trace() - 2.0 * root_trace).max(0.0)
}

/// Fréchet distance between Gaussian fits (covariance ridge `1e−6·I`) of two descriptor sets.
pub fn frechet_distance_sq(a: &[DescriptorVec], b: &[DescriptorVec]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(format!(
            "Fréchet distance needs at least two molecules per set, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (m1, c1) = moments(a);
    let (m2, c2) = moments(b);
    Ok(gaussian_frechet_sq(&m1, &c1, &m2, &c2))
}

/// `exp(−d²/8)`.
pub fn frechet_descriptor_score(generated: &[DescriptorVec], training: &[DescriptorVec]) -> Result<f64> {
    Ok((-frechet_distance_sq(generated, training)? / FRECHET_SCALE).exp())
}
