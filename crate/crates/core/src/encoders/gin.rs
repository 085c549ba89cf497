use chem::{node_class, BondType, MolGraph, NODE_CLASSES};
use numcore::{init, Bound, ParamId, Params, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bond kinds that carry messages, in matrix order.
pub const EDGE_TYPES: [BondType; 4] = [BondType::Single, BondType::Double, BondType::Triple, BondType::Aromatic];

/// Several graphs packed as one block-diagonal graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    pub num_graphs: usize,
    /// `[nodes, NODE_CLASSES]` one-hot node features.
    pub x: Tensor,
    /// Directed `(src, dst)` lists per entry of [`EDGE_TYPES`].
    pub edges: [(Vec<usize>, Vec<usize>); 4],
    pub graph_of_node: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl GraphBatch {
    pub fn new(graphs: &[&MolGraph]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::invalid("empty graph batch"));
        }
        let total: usize = graphs.iter().map(|g| g.num_atoms()).sum();
        let mut x = vec![0.0; total * NODE_CLASSES];
        let mut edges: [(Vec<usize>, Vec<usize>); 4] = Default::default();
        let mut graph_of_node = Vec::with_capacity(total);
        let mut sizes = Vec::with_capacity(graphs.len());
        let mut offset = 0;
        for (k, g) in graphs.iter().enumerate() {
            for i in 0..g.num_atoms() {
                x[(offset + i) * NODE_CLASSES + node_class(g.atom(i))] = 1.0;
                graph_of_node.push(k);
                for (j, b) in g.neighbors(i) {
                    let t = EDGE_TYPES.iter().position(|&e| e == b).expect("bond kind");
                    edges[t].0.push(offset + j);
                    edges[t].1.push(offset + i);
                }
            }
            sizes.push(g.num_atoms());
            offset += g.num_atoms();
        }
        Ok(Self {
            num_graphs: graphs.len(),
            x: Tensor::matrix(total, NODE_CLASSES, x)?,
            edges,
            graph_of_node,
            sizes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph_of_node.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GinConfig {
    pub layers: usize,
    pub hidden: usize,
    pub latent_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct GinLayer {
    eps: ParamId,
    msg: [ParamId; 4],
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

/// Graph isomorphism network over typed edges with mean readout into the
/// mean and standard deviation of a diagonal Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Gin {
    pub cfg: GinConfig,
    pub params: Params,
    w_in: ParamId,
    b_in: ParamId,
    layers: Vec<GinLayer>,
    w_mu: ParamId,
    b_mu: ParamId,
    w_sigma: ParamId,
    b_sigma: ParamId,
}

/// One row per graph.
pub type Rows = Vec<Vec<f64>>;

pub const SIGMA_FLOOR: f64 = 1e-6;

impl Gin {
    pub fn new(cfg: GinConfig, rng: &mut impl Rng) -> Self {
        let h = cfg.hidden;
        let mut params = Params::new();
        let w_in = params.add("gin.in.w", init::glorot(rng, NODE_CLASSES, h));
        let b_in = params.add("gin.in.b", Tensor::zeros(&[1, h]));
        let layers = (0..cfg.layers)
            .map(|l| {
                let eps = params.add(format!("gin.{l}.eps"), Tensor::scalar(0.0));
                let msg = std::array::from_fn(|t| {
                    params.add(format!("gin.{l}.msg{t}"), init::glorot(rng, h, h))
                });
                GinLayer {
                    eps,
                    msg,
                    w1: params.add(format!("gin.{l}.w1"), init::glorot(rng, h, h)),
                    b1: params.add(format!("gin.{l}.b1"), Tensor::zeros(&[1, h])),
                    w2: params.add(format!("gin.{l}.w2"), init::glorot(rng, h, h)),
                    b2: params.add(format!("gin.{l}.b2"), Tensor::zeros(&[1, h])),
                }
            })
            .collect();
        let w_mu = params.add("gin.mu.w", init::glorot(rng, h, cfg.latent_dim));
        let b_mu = params.add("gin.mu.b", Tensor::zeros(&[1, cfg.latent_dim]));
        let w_sigma = params.add("gin.sigma.w", init::glorot(rng, h, cfg.latent_dim));
        let b_sigma = params.add("gin.sigma.b", Tensor::zeros(&[1, cfg.latent_dim]));
        Self {
            cfg,
            params,
            w_in,
            b_in,
            layers,
            w_mu,
            b_mu,
            w_sigma,
            b_sigma,
        }
    }

    /// `(μ, σ)`, each `[num_graphs, latent_dim]`.
    pub fn forward(&self, tape: &mut Tape, b: &Bound, batch: &GraphBatch) -> Result<(Var, Var)> {
        if batch.x.cols() != NODE_CLASSES {
            return Err(Error::invalid(format!(
                "node features have {} columns, expected {NODE_CLASSES}",
                batch.x.cols()
            )));
        }
        let n = batch.num_nodes();
        let x = tape.constant(batch.x.clone());
        let mut h = tape.affine(x, b[self.w_in], b[self.b_in])?;
        for layer in &self.layers {
            let scaled = tape.scale_by(h, b[layer.eps])?;
            let mut pre = tape.add(h, scaled)?;
            for (t, (src, dst)) in batch.edges.iter().enumerate() {
                if src.is_empty() {
                    continue;
                }
                let m = tape.matmul(h, b[layer.msg[t]])?;
                let m = tape.gather_rows(m, src)?;
                let agg = tape.scatter_rows(m, dst, n)?;
                pre = tape.add(pre, agg)?;
            }
            let u = tape.affine(pre, b[layer.w1], b[layer.b1])?;
            let u = tape.relu(u)?;
            let u = tape.affine(u, b[layer.w2], b[layer.b2])?;
            h = tape.relu(u)?;
        }
        let pooled = tape.scatter_rows(h, &batch.graph_of_node, batch.num_graphs)?;
        let inv = Tensor::matrix(batch.num_graphs, 1, batch.sizes.iter().map(|&s| 1.0 / s as f64).collect())?;
        let inv = tape.constant(inv);
        let pooled = tape.mul_col(pooled, inv)?;
        let mu = tape.affine(pooled, b[self.w_mu], b[self.b_mu])?;
        let s = tape.affine(pooled, b[self.w_sigma], b[self.b_sigma])?;
        let s = tape.softplus(s)?;
        let sigma = tape.add_scalar(s, SIGMA_FLOOR)?;
        Ok((mu, sigma))
    }

    /// Means and standard deviations as plain rows.
    pub fn encode(&self, graphs: &[&MolGraph]) -> Result<(Rows, Rows)> {
        let mut mus = Vec::with_capacity(graphs.len());
        let mut sigmas = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(128) {
            let batch = GraphBatch::new(chunk)?;
            let mut tape = Tape::new();
            let b = tape.bind_frozen(&self.params);
            let (mu, sigma) = self.forward(&mut tape, &b, &batch)?;
            for (v, out) in [(mu, &mut mus), (sigma, &mut sigmas)] {
                let t = tape.value(v);
                out.extend((0..t.rows()).map(|i| t.row_slice(i).to_vec()));
            }
        }
        Ok((mus, sigmas))
    }
}
