//! Minibatch bookkeeping shared by the training stages.

use numcore::{clip_grad_norm, AdamState, Gradients, Params, Tape, Bound};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::Result;

/// One epoch: the mean minibatch loss while training, and the objective
/// re-evaluated after the epoch on draws fixed for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss<T> {
    pub train: T,
    pub monitor: T,
}

/// Global gradient-norm bound applied before every Adam step.
pub const CLIP_NORM: f64 = 5.0;

/// Final learning rate as a fraction of the initial one.
pub const LR_FLOOR: f64 = 0.1;

/// Cosine annealing from `base` at epoch 0 towards `LR_FLOOR · base`.
pub fn annealed_lr(base: f64, epoch: usize, epochs: usize) -> f64 {
    let frac = if epochs <= 1 { 0.0 } else { epoch as f64 / (epochs - 1) as f64 };
    base * (LR_FLOOR + (1.0 - LR_FLOOR) * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()))
}

/// Shuffled minibatches covering `0..n`. A trailing batch of one is folded
/// into its predecessor so every batch can form negatives.
pub fn minibatches(n: usize, batch_size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

/// Unshuffled batches of `0..n`, folded like [`minibatches`].
pub fn fixed_batches(n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let order: Vec<usize> = (0..n).collect();
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

/// Pulls this model's gradients off the tape, clips them and steps Adam.
pub fn apply(tape: &Tape, grads: &Gradients, bound: &Bound, params: &mut Params, adam: &mut AdamState) -> Result<()> {
    let mut g = grads.for_params(tape, bound);
    clip_grad_norm(&mut g, CLIP_NORM);
    adam.step(params, &g)?;
    Ok(())
}

/// Trailing moving average with the given window (shorter at the start).
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            let s = &values[lo..=i];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

/// Non-overlapping window means: `[mean(v[0..w]), mean(v[w..2w]), ...]`,
/// dropping an incomplete tail.
pub fn block_means(values: &[f64], window: usize) -> Vec<f64> {
    values
        .chunks_exact(window.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

pub fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}
