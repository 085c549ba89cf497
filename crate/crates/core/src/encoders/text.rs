use numcore::{init, Bound, ParamId, Params, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::PAD;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextEncoderConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub out_dim: usize,
}

/// Token embedding, one self-attention block with a residual connection,
/// mean pooling over real tokens and a linear map to the condition size.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder {
    pub cfg: TextEncoderConfig,
    pub params: Params,
    emb: ParamId,
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
    proj: ParamId,
    proj_b: ParamId,
}

// keeps cross-sequence attention weights at exactly zero after softmax
const MASKED: f64 = -1e9;

impl TextEncoder {
    pub fn new(cfg: TextEncoderConfig, rng: &mut impl Rng) -> Self {
        let d = cfg.embed_dim;
        let mut params = Params::new();
        let emb = params.add("text.embedding", init::normal_matrix(rng, cfg.vocab_size, d, 0.5));
        let wq = params.add("text.attn.q", init::glorot(rng, d, d));
        let wk = params.add("text.attn.k", init::glorot(rng, d, d));
        let wv = params.add("text.attn.v", init::glorot(rng, d, d));
        let wo = params.add("text.attn.out", init::glorot(rng, d, d));
        let proj = params.add("text.proj.w", init::glorot(rng, d, cfg.out_dim));
        let proj_b = params.add("text.proj.b", Tensor::zeros(&[1, cfg.out_dim]));
        Self {
            cfg,
            params,
            emb,
            wq,
            wk,
            wv,
            wo,
            proj,
            proj_b,
        }
    }

    /// Encodes a batch of token sequences (pads anywhere are ignored) into a
    /// `[batch, out_dim]` variable.
    pub fn forward(&self, tape: &mut Tape, b: &Bound, seqs: &[&[usize]]) -> Result<Var> {
        if seqs.is_empty() {
            return Err(Error::invalid("empty text batch"));
        }
        let mut ids = Vec::new();
        let mut owner = Vec::new();
        let mut lens = Vec::with_capacity(seqs.len());
        for (k, s) in seqs.iter().enumerate() {
            let before = ids.len();
            for &t in s.iter().filter(|&&t| t != PAD) {
                if t >= self.cfg.vocab_size {
                    return Err(Error::invalid(format!("token id {t} outside vocabulary of {}", self.cfg.vocab_size)));
                }
                ids.push(t);
                owner.push(k);
            }
            if ids.len() == before {
                return Err(Error::invalid(format!("text {k} has only padding")));
            }
            lens.push((ids.len() - before) as f64);
        }
        let n = ids.len();
        let d = self.cfg.embed_dim;
        let e = tape.gather_rows(b[self.emb], &ids)?;
        let q = tape.matmul(e, b[self.wq])?;
        let k = tape.matmul(e, b[self.wk])?;
        let v = tape.matmul(e, b[self.wv])?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, 1.0 / (d as f64).sqrt())?;
        let mask = Tensor::from_fn(n, n, |i, j| if owner[i] == owner[j] { 0.0 } else { MASKED });
        let mask = tape.constant(mask);
        let scores = tape.add(scores, mask)?;
        let attn = tape.softmax_rows(scores)?;
        let mixed = tape.matmul(attn, v)?;
        let mixed = tape.matmul(mixed, b[self.wo])?;
        let h = tape.add(e, mixed)?;
        let pooled = tape.scatter_rows(h, &owner, seqs.len())?;
        let inv = tape.constant(Tensor::matrix(seqs.len(), 1, lens.iter().map(|l| 1.0 / l).collect())?);
        let pooled = tape.mul_col(pooled, inv)?;
        Ok(tape.affine(pooled, b[self.proj], b[self.proj_b])?)
    }

    /// Embeddings of `seqs` as plain rows, evaluated in chunks.
    pub fn encode(&self, seqs: &[&[usize]]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(seqs.len());
        for chunk in seqs.chunks(64) {
            let mut tape = Tape::new();
            let b = tape.bind_frozen(&self.params);
            let c = self.forward(&mut tape, &b, chunk)?;
            let t = tape.value(c);
            out.extend((0..t.rows()).map(|i| t.row_slice(i).to_vec()));
        }
        Ok(out)
    }
}
