use numcore::{init, Bound, ParamId, Params, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const TIME_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub latent_dim: usize,
    pub cond_dim: usize,
    pub hidden: usize,
    /// Number of linear layers, at least 2.
    pub layers: usize,
}

/// Sinusoidal embedding of an integer timestep: sines then cosines over
/// geometrically spaced frequencies.
pub fn time_embedding(t: usize) -> [f64; TIME_DIM] {
    let half = TIME_DIM / 2;
    let mut out = [0.0; TIME_DIM];
    for k in 0..half {
        let freq = (-(10_000f64).ln() * k as f64 / half as f64).exp();
        let a = t as f64 * freq;
        out[k] = a.sin();
        out[half + k] = a.cos();
    }
    out
}

/// Condition rows for a batch: a real embedding or the learned null embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition<'a> {
    Text(&'a [f64]),
    Null,
}

/// MLP over `concat(z_t, c, time embedding)` predicting the clean latent.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub cfg: DenoiserConfig,
    pub params: Params,
    null: ParamId,
    layers: Vec<(ParamId, ParamId)>,
}

impl Denoiser {
    pub fn new(cfg: DenoiserConfig, rng: &mut impl Rng) -> Result<Self> {
        if cfg.layers < 2 {
            return Err(Error::invalid("denoiser needs at least two layers"));
        }
        let mut params = Params::new();
        let null = params.add("den.null", init::normal_row(rng, cfg.cond_dim, 1.0));
        let mut dims = vec![cfg.latent_dim + cfg.cond_dim + TIME_DIM];
        dims.extend(std::iter::repeat_n(cfg.hidden, cfg.layers - 1));
        dims.push(cfg.latent_dim);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                (
                    params.add(format!("den.{l}.w"), init::glorot(rng, w[0], w[1])),
                    params.add(format!("den.{l}.b"), Tensor::zeros(&[1, w[1]])),
                )
            })
            .collect();
        Ok(Self { cfg, params, null, layers })
    }

    pub fn null_embedding(&self) -> &Tensor {
        self.params.get(self.null)
    }

    /// Batched prediction. `cond` holds one real condition row per sample
    /// (`[batch, cond_dim]`, may be `None` when every row is dropped);
    /// rows listed in `dropped` use the null embedding instead.
    pub fn forward(
        &self,
        tape: &mut Tape,
        b: &Bound,
        zt: Var,
        t: &[usize],
        cond: Option<Var>,
        dropped: &[bool],
    ) -> Result<Var> {
        let shape = tape.value(zt).shape().to_vec();
        let rows = shape[0];
        if shape.len() != 2 || shape[1] != self.cfg.latent_dim || t.len() != rows || dropped.len() != rows {
            return Err(Error::invalid(format!(
                "denoiser input {shape:?} with {} timesteps and {} drop flags",
                t.len(),
                dropped.len()
            )));
        }
        let c = match cond {
            Some(c) => {
                if tape.value(c).shape() != [rows, self.cfg.cond_dim] {
                    return Err(Error::invalid(format!(
                        "condition shape {:?}, expected [{rows}, {}]",
                        tape.value(c).shape(),
                        self.cfg.cond_dim
                    )));
                }
                let table = tape.concat_rows(&[c, b[self.null]])?;
                let idx: Vec<usize> = (0..rows).map(|i| if dropped[i] { rows } else { i }).collect();
                tape.gather_rows(table, &idx)?
            }
            None => {
                if !dropped.iter().all(|&d| d) {
                    return Err(Error::invalid("real conditions requested without condition rows"));
                }
                tape.gather_rows(b[self.null], &vec![0; rows])?
            }
        };
        let temb: Vec<f64> = t.iter().flat_map(|&s| time_embedding(s)).collect();
        let temb = tape.constant(Tensor::matrix(rows, TIME_DIM, temb)?);
        let mut h = tape.concat_cols(&[zt, c, temb])?;
        for (l, &(w, bias)) in self.layers.iter().enumerate() {
            h = tape.affine(h, b[w], b[bias])?;
            if l + 1 < self.layers.len() {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    /// Plain-value prediction for a batch sharing one timestep.
    pub fn predict(&self, zt: &Tensor, t: usize, cond: &[Condition<'_>]) -> Result<Tensor> {
        let rows = zt.rows();
        if cond.len() != rows {
            return Err(Error::invalid("one condition per latent row required"));
        }
        let mut tape = Tape::new();
        let b = tape.bind_frozen(&self.params);
        let z = tape.constant(zt.clone());
        let dropped: Vec<bool> = cond.iter().map(|c| matches!(c, Condition::Null)).collect();
        let cv = if dropped.iter().all(|&d| d) {
            None
        } else {
            let mut data = Vec::with_capacity(rows * self.cfg.cond_dim);
            for c in cond {
                match c {
                    Condition::Text(v) if v.len() == self.cfg.cond_dim => data.extend_from_slice(v),
                    Condition::Text(v) => {
                        return Err(Error::invalid(format!(
                            "condition has {} entries, expected {}",
                            v.len(),
                            self.cfg.cond_dim
                        )))
                    }
                    Condition::Null => data.extend(std::iter::repeat_n(0.0, self.cfg.cond_dim)),
                }
            }
            Some(tape.constant(Tensor::matrix(rows, self.cfg.cond_dim, data)?))
        };
        let out = self.forward(&mut tape, &b, z, &vec![t; rows], cv, &dropped)?;
        Ok(tape.value(out).clone())
    }
}
