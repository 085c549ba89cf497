//! Graph variational autoencoder: reparameterization, one-shot decoding,
//! the ELBO objective and latent-to-molecule realization.

mod decoder;

pub use decoder::{Decoder, DecoderConfig, PairIndex, EDGE_CLASSES, N_MAX, PAD_CLASS, SLOT_CLASSES};

use chem::{from_feature_tensors, node_class, valence_repair, write_canonical_smiles, ChemError, MolGraph, NODE_CLASSES};
use numcore::{AdamState, Tape, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoders::{Gin, GraphBatch};
use crate::training::{annealed_lr, apply, fixed_batches, minibatches, EpochLoss};
use crate::{Error, Result};

/// `z = μ + σ ⊙ ε`.
pub fn reparameterize(tape: &mut Tape, mu: Var, sigma: Var, eps: Var) -> Result<Var> {
    let noise = tape.mul(sigma, eps)?;
    Ok(tape.add(mu, noise)?)
}

/// Reconstruction target for one molecule, slots in canonical SMILES order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaeTarget {
    pub num_atoms: usize,
    /// `N_MAX` slot classes, [`PAD_CLASS`] past the last atom.
    pub slots: Vec<usize>,
    /// Edge class of every `i < j < num_atoms` pair in row-major order.
    pub edges: Vec<usize>,
}

impl VaeTarget {
    pub fn new(g: &MolGraph) -> Result<Self> {
        let n = g.num_atoms();
        if n > N_MAX {
            return Err(Error::Chem(ChemError::TooManyAtoms(n)));
        }
        let order = write_canonical_smiles(g).atom_order;
        if order.len() != n {
            return Err(Error::invalid("reconstruction targets must be connected molecules"));
        }
        let g = g.permuted(&order)?;
        let mut slots = vec![PAD_CLASS; N_MAX];
        for (i, slot) in slots.iter_mut().enumerate().take(n) {
            *slot = node_class(g.atom(i));
        }
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                edges.push(g.bond(i, j).index());
            }
        }
        Ok(Self {
            num_atoms: n,
            slots,
            edges,
        })
    }
}

/// Values of the loss terms, averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Per-graph sum of slot cross-entropies (all `N_MAX` slots) and edge
/// cross-entropies (strict upper triangle of real atoms), averaged over
/// the batch.
pub fn reconstruction_loss(
    tape: &mut Tape,
    node_logits: Var,
    edge_logits: Option<Var>,
    targets: &[&VaeTarget],
) -> Result<Var> {
    let b = targets.len();
    if b == 0 {
        return Err(Error::invalid("empty reconstruction batch"));
    }
    if tape.value(node_logits).shape() != [b * N_MAX, SLOT_CLASSES] {
        return Err(Error::invalid(format!(
            "slot logits shape {:?} for {b} targets",
            tape.value(node_logits).shape()
        )));
    }
    let slot_targets: Vec<usize> = targets.iter().flat_map(|t| t.slots.iter().copied()).collect();
    let lse = tape.log_sum_exp_rows(node_logits)?;
    let picked = tape.pick_cols(node_logits, &slot_targets)?;
    let ce = tape.sub(lse, picked)?;
    let mut total = tape.sum(ce)?;
    let edge_targets: Vec<usize> = targets.iter().flat_map(|t| t.edges.iter().copied()).collect();
    match edge_logits {
        Some(e) => {
            if tape.value(e).rows() != edge_targets.len() {
                return Err(Error::invalid("edge logits do not match target pairs"));
            }
            let lse = tape.log_sum_exp_rows(e)?;
            let picked = tape.pick_cols(e, &edge_targets)?;
            let ce = tape.sub(lse, picked)?;
            let s = tape.sum(ce)?;
            total = tape.add(total, s)?;
        }
        None if !edge_targets.is_empty() => return Err(Error::invalid("targets have edges but no edge logits")),
        None => {}
    }
    Ok(tape.scale(total, 1.0 / b as f64)?)
}

/// Closed-form `KL(N(μ, σ²) ‖ N(0, I))` summed over dimensions, averaged over rows.
pub fn kl_to_standard_normal(tape: &mut Tape, mu: Var, sigma: Var) -> Result<Var> {
    let rows = tape.value(mu).rows();
    let m2 = tape.square(mu)?;
    let s2 = tape.square(sigma)?;
    let ls = tape.ln(sigma)?;
    let ls2 = tape.scale(ls, 2.0)?;
    let t = tape.add(m2, s2)?;
    let t = tape.sub(t, ls2)?;
    let t = tape.add_scalar(t, -1.0)?;
    let s = tape.sum(t)?;
    Ok(tape.scale(s, 0.5 / rows as f64)?)
}

/// Pair index for the real-atom upper triangles of a batch.
pub fn target_pairs(targets: &[&VaeTarget]) -> PairIndex {
    let mut pairs = PairIndex::default();
    for (k, t) in targets.iter().enumerate() {
        pairs.push_upper(k, t.num_atoms);
    }
    pairs
}

/// Records `recon + α·KL` for a batch with noise `eps` (`[batch, latent_dim]`).
pub fn elbo_loss(
    tape: &mut Tape,
    gin: (&Gin, &numcore::Bound),
    dec: (&Decoder, &numcore::Bound),
    graphs: &GraphBatch,
    targets: &[&VaeTarget],
    eps: Tensor,
    alpha: f64,
) -> Result<(Var, Var, Var)> {
    let (mu, sigma) = gin.0.forward(tape, gin.1, graphs)?;
    let ev = tape.constant(eps);
    let z = reparameterize(tape, mu, sigma, ev)?;
    let recon = decode_loss(tape, dec, z, targets)?;
    let kl = kl_to_standard_normal(tape, mu, sigma)?;
    let weighted = tape.scale(kl, alpha)?;
    let total = tape.add(recon, weighted)?;
    Ok((total, recon, kl))
}

/// Reconstruction loss of `targets` from latents `z`.
pub fn decode_loss(tape: &mut Tape, dec: (&Decoder, &numcore::Bound), z: Var, targets: &[&VaeTarget]) -> Result<Var> {
    let states = dec.0.slot_states(tape, dec.1, z)?;
    let nodes = dec.0.node_logits(tape, dec.1, states)?;
    let pairs = target_pairs(targets);
    let edges = if pairs.is_empty() {
        None
    } else {
        Some(dec.0.edge_logits(tape, dec.1, states, &pairs)?)
    };
    reconstruction_loss(tape, nodes, edges, targets)
}

pub fn standard_normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub alpha_kl: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

/// The ELBO over fixed batches of the whole dataset with noise `eps`
/// (`[graphs, latent_dim]`, row `i` for molecule `i`).
pub fn vae_objective(
    gin: &Gin,
    dec: &Decoder,
    graphs: &[MolGraph],
    targets: &[VaeTarget],
    eps: &Tensor,
    cfg: &VaeConfig,
) -> Result<LossParts> {
    let batches = fixed_batches(graphs.len(), cfg.batch_size);
    let mut sums = LossParts { total: 0.0, recon: 0.0, kl: 0.0 };
    for idx in &batches {
        let gs: Vec<&MolGraph> = idx.iter().map(|&i| &graphs[i]).collect();
        let ts: Vec<&VaeTarget> = idx.iter().map(|&i| &targets[i]).collect();
        let batch = GraphBatch::new(&gs)?;
        let e = Tensor::matrix(idx.len(), eps.cols(), idx.iter().flat_map(|&i| eps.row_slice(i).to_vec()).collect())?;
        let mut tape = Tape::new();
        let bg = tape.bind_frozen(&gin.params);
        let bd = tape.bind_frozen(&dec.params);
        let (total, recon, kl) = elbo_loss(&mut tape, (gin, &bg), (dec, &bd), &batch, &ts, e, cfg.alpha_kl)?;
        sums.total += tape.value(total).item()?;
        sums.recon += tape.value(recon).item()?;
        sums.kl += tape.value(kl).item()?;
    }
    let k = batches.len() as f64;
    Ok(LossParts {
        total: sums.total / k,
        recon: sums.recon / k,
        kl: sums.kl / k,
    })
}

/// Trains encoder and decoder on the ELBO with one fresh `ε` per molecule
/// per epoch.
pub fn train_vae(
    gin: &mut Gin,
    dec: &mut Decoder,
    graphs: &[MolGraph],
    cfg: &VaeConfig,
    rng: &mut impl Rng,
) -> Result<Vec<EpochLoss<LossParts>>> {
    if graphs.is_empty() {
        return Err(Error::invalid("VAE training needs at least one molecule"));
    }
    let targets = graphs.iter().map(VaeTarget::new).collect::<Result<Vec<_>>>()?;
    let monitor_eps = standard_normal(rng, graphs.len(), gin.cfg.latent_dim);
    let mut adam_g = AdamState::new(&gin.params, cfg.lr);
    let mut adam_d = AdamState::new(&dec.params, cfg.lr);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = annealed_lr(cfg.lr, epoch, cfg.epochs);
        adam_g.lr = lr;
        adam_d.lr = lr;
        let mut sums = LossParts { total: 0.0, recon: 0.0, kl: 0.0 };
        let batches = minibatches(graphs.len(), cfg.batch_size, rng);
        for idx in &batches {
            let gs: Vec<&MolGraph> = idx.iter().map(|&i| &graphs[i]).collect();
            let ts: Vec<&VaeTarget> = idx.iter().map(|&i| &targets[i]).collect();
            let batch = GraphBatch::new(&gs)?;
            let eps = standard_normal(rng, idx.len(), gin.cfg.latent_dim);
            let mut tape = Tape::new();
            let bg = tape.bind(&gin.params);
            let bd = tape.bind(&dec.params);
            let (total, recon, kl) = elbo_loss(&mut tape, (gin, &bg), (dec, &bd), &batch, &ts, eps, cfg.alpha_kl)?;
            sums.total += tape.value(total).item()?;
            sums.recon += tape.value(recon).item()?;
            sums.kl += tape.value(kl).item()?;
            let grads = tape.backward(total)?;
            apply(&tape, &grads, &bg, &mut gin.params, &mut adam_g)?;
            apply(&tape, &grads, &bd, &mut dec.params, &mut adam_d)?;
        }
        let k = batches.len() as f64;
        curve.push(EpochLoss {
            train: LossParts {
                total: sums.total / k,
                recon: sums.recon / k,
                kl: sums.kl / k,
            },
            monitor: vae_objective(gin, dec, graphs, &targets, &monitor_eps, cfg)?,
        });
    }
    Ok(curve)
}

fn argmax_last(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x >= v[best] {
            best = k;
        }
    }
    best
}

/// Decodes `z` into a molecule: argmax slots, drop padding, argmax
/// symmetrized edges, keep the largest component, and optionally repair
/// valences (then keep the largest component again).
pub fn sample_decode(dec: &Decoder, z: &[f64], repair: bool) -> Result<MolGraph> {
    let (nodes, edges) = dec.decode_logits(z)?;
    let mut x = Vec::with_capacity(N_MAX * NODE_CLASSES);
    let mut mask = Vec::with_capacity(N_MAX);
    for i in 0..N_MAX {
        let row = nodes.row_slice(i);
        mask.push(argmax_last(row) != PAD_CLASS);
        x.extend_from_slice(&row[..NODE_CLASSES]);
    }
    let g = match from_feature_tensors(&x, &edges, &mask) {
        Ok(g) => g,
        Err(ChemError::Empty) => return Err(Error::EmptyMolecule),
        Err(e) => return Err(e.into()),
    };
    let g = g.largest_component();
    if repair {
        Ok(valence_repair(&g).largest_component())
    } else {
        Ok(g)
    }
}
