use chem::{MAX_ATOMS, NODE_CLASSES};
use numcore::{init, Bound, ParamId, Params, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Node slots per decoded graph.
pub const N_MAX: usize = MAX_ATOMS;
/// Atom classes plus the padding class.
pub const SLOT_CLASSES: usize = NODE_CLASSES + 1;
pub const PAD_CLASS: usize = NODE_CLASSES;
pub const EDGE_CLASSES: usize = chem::EDGE_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    /// Per-slot state width.
    pub node_dim: usize,
    /// Rank of each edge class's bilinear form.
    pub rank: usize,
}

/// One-shot decoder: an MLP maps `z` to `N_MAX` slot states; slot logits come
/// from a linear head and edge logits from a symmetrized low-rank bilinear
/// scorer plus a symmetric additive term.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub cfg: DecoderConfig,
    pub params: Params,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    w_node: ParamId,
    b_node: ParamId,
    w_left: ParamId,
    w_right: ParamId,
    w_pair: ParamId,
    b_edge: ParamId,
}

/// Node pairs scored by [`Decoder::edge_logits`], as global slot rows.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairIndex {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl PairIndex {
    /// Every `i < j < n` pair of graph `k`'s slots.
    pub fn push_upper(&mut self, k: usize, n: usize) {
        for i in 0..n {
            for j in i + 1..n {
                self.left.push(k * N_MAX + i);
                self.right.push(k * N_MAX + j);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }
}

impl Decoder {
    pub fn new(cfg: DecoderConfig, rng: &mut impl Rng) -> Self {
        let mut params = Params::new();
        let slots = N_MAX * cfg.node_dim;
        let w1 = params.add("dec.w1", init::glorot(rng, cfg.latent_dim, cfg.hidden));
        let b1 = params.add("dec.b1", Tensor::zeros(&[1, cfg.hidden]));
        let w2 = params.add("dec.w2", init::glorot(rng, cfg.hidden, slots));
        let b2 = params.add("dec.b2", init::normal_row(rng, slots, 0.1));
        let w_node = params.add("dec.node.w", init::glorot(rng, cfg.node_dim, SLOT_CLASSES));
        let b_node = params.add("dec.node.b", Tensor::zeros(&[1, SLOT_CLASSES]));
        let w_left = params.add("dec.edge.left", init::glorot(rng, cfg.node_dim, EDGE_CLASSES * cfg.rank));
        let w_right = params.add("dec.edge.right", init::glorot(rng, cfg.node_dim, EDGE_CLASSES * cfg.rank));
        let w_pair = params.add("dec.edge.pair", init::glorot(rng, cfg.node_dim, EDGE_CLASSES));
        let b_edge = params.add("dec.edge.b", Tensor::zeros(&[1, EDGE_CLASSES]));
        Self {
            cfg,
            params,
            w1,
            b1,
            w2,
            b2,
            w_node,
            b_node,
            w_left,
            w_right,
            w_pair,
            b_edge,
        }
    }

    /// Slot states `[batch * N_MAX, node_dim]` for latents `[batch, latent_dim]`.
    pub fn slot_states(&self, tape: &mut Tape, b: &Bound, z: Var) -> Result<Var> {
        let shape = tape.value(z).shape().to_vec();
        if shape.len() != 2 || shape[1] != self.cfg.latent_dim {
            return Err(Error::invalid(format!(
                "latent shape {shape:?}, expected [_, {}]",
                self.cfg.latent_dim
            )));
        }
        let h = tape.affine(z, b[self.w1], b[self.b1])?;
        let h = tape.relu(h)?;
        let s = tape.affine(h, b[self.w2], b[self.b2])?;
        let s = tape.relu(s)?;
        Ok(tape.reshape(s, &[shape[0] * N_MAX, self.cfg.node_dim])?)
    }

    /// `[batch * N_MAX, SLOT_CLASSES]`.
    pub fn node_logits(&self, tape: &mut Tape, b: &Bound, states: Var) -> Result<Var> {
        Ok(tape.affine(states, b[self.w_node], b[self.b_node])?)
    }

    /// `[pairs, EDGE_CLASSES]`; the score of `(i, j)` equals that of `(j, i)` exactly.
    pub fn edge_logits(&self, tape: &mut Tape, b: &Bound, states: Var, pairs: &PairIndex) -> Result<Var> {
        if pairs.is_empty() {
            return Err(Error::invalid("no node pairs to score"));
        }
        let r = self.cfg.rank;
        let left = tape.matmul(states, b[self.w_left])?;
        let right = tape.matmul(states, b[self.w_right])?;
        let li = tape.gather_rows(left, &pairs.left)?;
        let rj = tape.gather_rows(right, &pairs.right)?;
        let lj = tape.gather_rows(left, &pairs.right)?;
        let ri = tape.gather_rows(right, &pairs.left)?;
        let a = tape.mul(li, rj)?;
        let c = tape.mul(lj, ri)?;
        let prod = tape.add(a, c)?;
        let prod = tape.scale(prod, 0.5)?;
        // sums each class's block of `r` columns
        let blocks = Tensor::from_fn(EDGE_CLASSES * r, EDGE_CLASSES, |i, j| if i / r == j { 1.0 } else { 0.0 });
        let blocks = tape.constant(blocks);
        let bilinear = tape.matmul(prod, blocks)?;
        let pair = tape.matmul(states, b[self.w_pair])?;
        let pi = tape.gather_rows(pair, &pairs.left)?;
        let pj = tape.gather_rows(pair, &pairs.right)?;
        let additive = tape.add(pi, pj)?;
        let logits = tape.add(bilinear, additive)?;
        Ok(tape.add_row(logits, b[self.b_edge])?)
    }

    /// Full logits for one latent: slot logits `[N_MAX, SLOT_CLASSES]` and
    /// an `N_MAX × N_MAX × EDGE_CLASSES` tensor, exactly symmetric, with the
    /// no-edge class on the diagonal.
    pub fn decode_logits(&self, z: &[f64]) -> Result<(Tensor, Vec<f64>)> {
        let mut tape = Tape::new();
        let b = tape.bind_frozen(&self.params);
        let zv = tape.constant(Tensor::row(z.to_vec())?);
        let states = self.slot_states(&mut tape, &b, zv)?;
        let nodes = self.node_logits(&mut tape, &b, states)?;
        let mut pairs = PairIndex::default();
        pairs.push_upper(0, N_MAX);
        let edges = self.edge_logits(&mut tape, &b, states, &pairs)?;
        let ev = tape.value(edges);
        let mut full = vec![0.0; N_MAX * N_MAX * EDGE_CLASSES];
        for i in 0..N_MAX {
            full[(i * N_MAX + i) * EDGE_CLASSES] = 1.0;
        }
        for (p, (&i, &j)) in pairs.left.iter().zip(&pairs.right).enumerate() {
            let row = ev.row_slice(p);
            full[(i * N_MAX + j) * EDGE_CLASSES..(i * N_MAX + j + 1) * EDGE_CLASSES].copy_from_slice(row);
            full[(j * N_MAX + i) * EDGE_CLASSES..(j * N_MAX + i + 1) * EDGE_CLASSES].copy_from_slice(row);
        }
        Ok((tape.value(nodes).clone(), full))
    }
}
