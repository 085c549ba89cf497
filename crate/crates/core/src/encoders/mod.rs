//! Text and graph encoders and their contrastive alignment.

mod contrastive;
mod gin;
mod text;
mod vocab;

pub use contrastive::{contrastive_loss, cosine, normalize_rows};
pub use gin::{Gin, GinConfig, GraphBatch, EDGE_TYPES, SIGMA_FLOOR};
pub use text::{TextEncoder, TextEncoderConfig};
pub use vocab::{words, Tokens, Vocab, DEFAULT_MAX_LEN, PAD, UNK};

use chem::MolGraph;
use numcore::{AdamState, Tape};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::training::{annealed_lr, apply, fixed_batches, minibatches, EpochLoss};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub symmetric: bool,
}

/// Contrastive loss over fixed, unshuffled batches of the whole dataset.
pub fn align_objective(
    gin: &Gin,
    text: &TextEncoder,
    graphs: &[MolGraph],
    tokens: &[Vec<usize>],
    cfg: &AlignConfig,
) -> Result<f64> {
    let batches = fixed_batches(graphs.len(), cfg.batch_size);
    let mut total = 0.0;
    for idx in &batches {
        let gs: Vec<&MolGraph> = idx.iter().map(|&i| &graphs[i]).collect();
        let ts: Vec<&[usize]> = idx.iter().map(|&i| tokens[i].as_slice()).collect();
        let batch = GraphBatch::new(&gs)?;
        let mut tape = Tape::new();
        let bg = tape.bind_frozen(&gin.params);
        let bt = tape.bind_frozen(&text.params);
        let (mu, _) = gin.forward(&mut tape, &bg, &batch)?;
        let c = text.forward(&mut tape, &bt, &ts)?;
        let loss = contrastive_loss(&mut tape, mu, c, cfg.tau, cfg.symmetric)?;
        total += tape.value(loss).item()?;
    }
    Ok(total / batches.len() as f64)
}

/// Contrastive pretraining of both encoders on `(graph, tokens)` pairs with
/// `μ_g` as the graph embedding.
pub fn pretrain_align(
    gin: &mut Gin,
    text: &mut TextEncoder,
    graphs: &[MolGraph],
    tokens: &[Vec<usize>],
    cfg: &AlignConfig,
    rng: &mut impl Rng,
) -> Result<Vec<EpochLoss<f64>>> {
    if graphs.is_empty() || graphs.len() != tokens.len() {
        return Err(Error::invalid(format!(
            "alignment needs matching non-empty data, got {} graphs and {} texts",
            graphs.len(),
            tokens.len()
        )));
    }
    let mut adam_g = AdamState::new(&gin.params, cfg.lr);
    let mut adam_t = AdamState::new(&text.params, cfg.lr);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = annealed_lr(cfg.lr, epoch, cfg.epochs);
        adam_g.lr = lr;
        adam_t.lr = lr;
        let mut total = 0.0;
        let batches = minibatches(graphs.len(), cfg.batch_size, rng);
        for idx in &batches {
            let gs: Vec<&MolGraph> = idx.iter().map(|&i| &graphs[i]).collect();
            let ts: Vec<&[usize]> = idx.iter().map(|&i| tokens[i].as_slice()).collect();
            let batch = GraphBatch::new(&gs)?;
            let mut tape = Tape::new();
            let bg = tape.bind(&gin.params);
            let bt = tape.bind(&text.params);
            let (mu, _) = gin.forward(&mut tape, &bg, &batch)?;
            let c = text.forward(&mut tape, &bt, &ts)?;
            let loss = contrastive_loss(&mut tape, mu, c, cfg.tau, cfg.symmetric)?;
            total += tape.value(loss).item()?;
            let grads = tape.backward(loss)?;
            apply(&tape, &grads, &bg, &mut gin.params, &mut adam_g)?;
            apply(&tape, &grads, &bt, &mut text.params, &mut adam_t)?;
        }
        curve.push(EpochLoss {
            train: total / batches.len() as f64,
            monitor: align_objective(gin, text, graphs, tokens, cfg)?,
        });
    }
    Ok(curve)
}
