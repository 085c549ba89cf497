//! Conditional latent diffusion: schedule, forward noising, the denoiser,
//! the regression objective with condition dropout, guidance and sampling.

mod denoiser;
mod schedule;

pub use denoiser::{time_embedding, Condition, Denoiser, DenoiserConfig, TIME_DIM};
pub use schedule::{respaced_ladder, NoiseSchedule, ScheduleKind, StepCoefficients, COSINE_S, MIN_STEP_ALPHA};

use chem::MolGraph;
use numcore::{AdamState, Bound, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoders::{Gin, GraphBatch, TextEncoder};
use crate::genvae::{elbo_loss, standard_normal, Decoder, VaeTarget};
use crate::training::{annealed_lr, apply, fixed_batches, minibatches, EpochLoss};
use crate::{Error, Result};

/// Chains advanced together in one denoiser call.
const CHAIN_BLOCK: usize = 256;
/// Fixed (t, ε, drop) draws per example in the per-epoch monitor objective.
const MONITOR_DRAWS: usize = 8;
const MONITOR_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub t_train: usize,
    pub t_sample: usize,
    pub p_drop: f64,
    pub w: f64,
    pub schedule: ScheduleKind,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            t_train: 100,
            t_sample: 50,
            p_drop: 0.1,
            w: 2.0,
            schedule: ScheduleKind::Cosine,
            lr: 1e-3,
            epochs: 50,
            batch_size: 32,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_sample == 0 || self.t_sample > self.t_train {
            return Err(Error::invalid(format!(
                "T_sample = {} must lie in 1..=T_train = {}",
                self.t_sample, self.t_train
            )));
        }
        if !(0.0..=1.0).contains(&self.p_drop) {
            return Err(Error::invalid(format!("p_drop = {} outside [0, 1]", self.p_drop)));
        }
        Ok(())
    }
}

/// `z_t = √ᾱ_t z0 + √(1−ᾱ_t) ε` for `t` in `0..=T`.
pub fn q_sample(schedule: &NoiseSchedule, z0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
    if t > schedule.t_max() {
        return Err(Error::invalid(format!("timestep {t} outside 0..={}", schedule.t_max())));
    }
    if z0.len() != eps.len() {
        return Err(Error::invalid("latent and noise lengths differ"));
    }
    let a = schedule.alpha_bar(t);
    let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
    Ok(z0.iter().zip(eps).map(|(z, e)| sa * z + sn * e).collect())
}

/// Random parts of one diffusion-loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionDraw {
    pub t: Vec<usize>,
    pub eps: Tensor,
    pub dropped: Vec<bool>,
}

impl DiffusionDraw {
    /// Per row: `t` uniform in `1..=T`, fresh standard-normal noise and a
    /// condition drop with probability `p_drop`.
    pub fn sample(rng: &mut impl Rng, rows: usize, dim: usize, t_max: usize, p_drop: f64) -> Self {
        let t = (0..rows).map(|_| rng.random_range(1..=t_max)).collect();
        let eps = standard_normal(rng, rows, dim);
        let dropped = (0..rows).map(|_| rng.random::<f64>() < p_drop).collect();
        Self { t, eps, dropped }
    }
}

/// Mean over the batch of `‖ẑ_θ(z_t, t, c) − z‖²`.
pub fn diffusion_loss(
    tape: &mut Tape,
    den: (&Denoiser, &Bound),
    schedule: &NoiseSchedule,
    z: Var,
    c: Var,
    draw: &DiffusionDraw,
) -> Result<Var> {
    let rows = tape.value(z).rows();
    if rows == 0 {
        return Err(Error::invalid("empty diffusion batch"));
    }
    if draw.t.len() != rows || draw.eps.shape() != tape.value(z).shape() {
        return Err(Error::invalid("noise draw does not match the latent batch"));
    }
    if let Some(&t) = draw.t.iter().find(|&&t| t == 0 || t > schedule.t_max()) {
        return Err(Error::invalid(format!("training timestep {t} outside 1..={}", schedule.t_max())));
    }
    let signal = Tensor::from_fn(rows, 1, |i, _| schedule.alpha_bar(draw.t[i]).sqrt());
    let noise = Tensor::from_fn(rows, draw.eps.cols(), |i, j| {
        (1.0 - schedule.alpha_bar(draw.t[i])).sqrt() * draw.eps.get(i, j)
    });
    let signal = tape.constant(signal);
    let noise = tape.constant(noise);
    let zs = tape.mul_col(z, signal)?;
    let zt = tape.add(zs, noise)?;
    let pred = den.0.forward(tape, den.1, zt, &draw.t, Some(c), &draw.dropped)?;
    let diff = tape.sub(pred, z)?;
    let sq = tape.square(diff)?;
    let s = tape.sum(sq)?;
    Ok(tape.scale(s, 1.0 / rows as f64)?)
}

/// Guided prediction `w·ẑ(z_t, t, c) + (1−w)·ẑ(z_t, t, ∅)`. `w = 1` and
/// `w = 0` return the single corresponding pass unchanged.
pub fn cfg_predict(den: &Denoiser, zt: &Tensor, t: usize, cond: &[Condition<'_>], w: f64) -> Result<Tensor> {
    if w == 1.0 {
        return den.predict(zt, t, cond);
    }
    let null = vec![Condition::Null; cond.len()];
    let uncond = den.predict(zt, t, &null)?;
    if w == 0.0 {
        return Ok(uncond);
    }
    let cpred = den.predict(zt, t, cond)?;
    let data = cpred.data().iter().zip(uncond.data()).map(|(c, u)| w * c + (1.0 - w) * u).collect();
    Ok(Tensor::new(cpred.shape().to_vec(), data)?)
}

/// One reverse step from `t` to `s < t`.
pub fn ancestral_step_between(
    schedule: &NoiseSchedule,
    s: usize,
    t: usize,
    zt: &[f64],
    pred: &[f64],
    eps: &[f64],
) -> Result<Vec<f64>> {
    if zt.len() != pred.len() || zt.len() != eps.len() {
        return Err(Error::invalid("latent, prediction and noise lengths differ"));
    }
    let k = schedule.coefficients(s, t)?;
    Ok(zt
        .iter()
        .zip(pred)
        .zip(eps)
        .map(|((z, p), e)| k.pred * p + k.zt * z + k.sigma * e)
        .collect())
}

/// One reverse step from `t` to `t − 1`.
pub fn ancestral_step(schedule: &NoiseSchedule, zt: &[f64], pred: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(Error::invalid("no reverse step from t = 0"));
    }
    ancestral_step_between(schedule, t - 1, t, zt, pred, eps)
}

/// The random stream owned by chain `chain` under `seed`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Runs `n` independent reverse chains over `ladder` with an arbitrary
/// predictor `predict(z_t batch, t, chain range) -> ẑ0 batch`. Chain `i`
/// draws all its noise from [`chain_rng`]`(seed, i)`, so results do not
/// depend on blocking.
pub fn sample_chains<F>(
    schedule: &NoiseSchedule,
    ladder: &[usize],
    dim: usize,
    n: usize,
    seed: u64,
    mut predict: F,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&Tensor, usize, std::ops::Range<usize>) -> Result<Tensor>,
{
    if ladder.len() < 2 || ladder[0] > schedule.t_max() || *ladder.last().expect("non-empty") != 0 {
        return Err(Error::invalid("ladder must run from ≤ T down to 0"));
    }
    let mut out = Vec::with_capacity(n);
    for start in (0..n).step_by(CHAIN_BLOCK) {
        let range = start..(start + CHAIN_BLOCK).min(n);
        let mut rngs: Vec<ChaCha8Rng> = range.clone().map(|i| chain_rng(seed, i as u64)).collect();
        let mut z: Vec<Vec<f64>> = rngs
            .iter_mut()
            .map(|r| (0..dim).map(|_| StandardNormal.sample(r)).collect())
            .collect();
        for pair in ladder.windows(2) {
            let (t, s) = (pair[0], pair[1]);
            let zt = Tensor::matrix(z.len(), dim, z.concat())?;
            let pred = predict(&zt, t, range.clone())?;
            if pred.shape() != zt.shape() {
                return Err(Error::invalid("predictor changed the batch shape"));
            }
            for (i, (zi, r)) in z.iter_mut().zip(&mut rngs).enumerate() {
                let eps: Vec<f64> = if s == 0 {
                    vec![0.0; dim]
                } else {
                    (0..dim).map(|_| StandardNormal.sample(r)).collect()
                };
                *zi = ancestral_step_between(schedule, s, t, zi, pred.row_slice(i), &eps)?;
            }
        }
        out.extend(z);
    }
    Ok(out)
}

/// Trained denoiser with its schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDiffusion {
    pub schedule: NoiseSchedule,
    pub denoiser: Denoiser,
}

impl LatentDiffusion {
    /// Guided samples, one per entry of `cond`, over the stride-respaced ladder.
    pub fn sample_latents(&self, cond: &[Condition<'_>], w: f64, t_sample: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let ladder = respaced_ladder(self.schedule.t_max(), t_sample)?;
        let dim = self.denoiser.cfg.latent_dim;
        sample_chains(&self.schedule, &ladder, dim, cond.len(), seed, |zt, t, range| {
            cfg_predict(&self.denoiser, zt, t, &cond[range], w)
        })
    }
}

fn rows_of(rows: &[Vec<f64>], idx: &[usize], dim: usize) -> Result<Tensor> {
    Ok(Tensor::matrix(idx.len(), dim, idx.iter().flat_map(|&i| rows[i].iter().copied()).collect())?)
}

impl DiffusionDraw {
    fn select(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            t: idx.iter().map(|&i| self.t[i]).collect(),
            eps: Tensor::matrix(
                idx.len(),
                self.eps.cols(),
                idx.iter().flat_map(|&i| self.eps.row_slice(i).to_vec()).collect(),
            )?,
            dropped: idx.iter().map(|&i| self.dropped[i]).collect(),
        })
    }
}

/// The diffusion loss over fixed batches of the whole dataset with one
/// draw row per example.
pub fn diffusion_objective(
    model: &LatentDiffusion,
    z: &[Vec<f64>],
    c: &[Vec<f64>],
    draw: &DiffusionDraw,
    batch_size: usize,
) -> Result<f64> {
    let (dz, dc) = (model.denoiser.cfg.latent_dim, model.denoiser.cfg.cond_dim);
    let batches = fixed_batches(z.len(), batch_size);
    let mut total = 0.0;
    for idx in &batches {
        let mut tape = Tape::new();
        let b = tape.bind_frozen(&model.denoiser.params);
        let zv = tape.constant(rows_of(z, idx, dz)?);
        let cv = tape.constant(rows_of(c, idx, dc)?);
        let loss = diffusion_loss(&mut tape, (&model.denoiser, &b), &model.schedule, zv, cv, &draw.select(idx)?)?;
        total += tape.value(loss).item()?;
    }
    Ok(total / batches.len() as f64)
}

/// Trains the denoiser on fixed latents `z` (rows of `μ_g`) and condition
/// rows `c`.
pub fn train_denoiser(
    model: &mut LatentDiffusion,
    z: &[Vec<f64>],
    c: &[Vec<f64>],
    cfg: &DiffusionConfig,
    rng: &mut impl Rng,
) -> Result<Vec<EpochLoss<f64>>> {
    cfg.validate()?;
    if z.is_empty() || z.len() != c.len() {
        return Err(Error::invalid(format!(
            "diffusion training needs matching non-empty data, got {} latents and {} conditions",
            z.len(),
            c.len()
        )));
    }
    let (dz, dc) = (model.denoiser.cfg.latent_dim, model.denoiser.cfg.cond_dim);
    // each example appears MONITOR_DRAWS times in the monitor set
    let zm: Vec<Vec<f64>> = z.iter().cycle().take(z.len() * MONITOR_DRAWS).cloned().collect();
    let cm: Vec<Vec<f64>> = c.iter().cycle().take(c.len() * MONITOR_DRAWS).cloned().collect();
    let monitor = DiffusionDraw::sample(rng, zm.len(), dz, model.schedule.t_max(), cfg.p_drop);
    let mut adam = AdamState::new(&model.denoiser.params, cfg.lr);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        adam.lr = annealed_lr(cfg.lr, epoch, cfg.epochs);
        let mut total = 0.0;
        let batches = minibatches(z.len(), cfg.batch_size, rng);
        for idx in &batches {
            let zb = rows_of(z, idx, dz)?;
            let cb = rows_of(c, idx, dc)?;
            let draw = DiffusionDraw::sample(rng, idx.len(), dz, model.schedule.t_max(), cfg.p_drop);
            let mut tape = Tape::new();
            let b = tape.bind(&model.denoiser.params);
            let zv = tape.constant(zb);
            let cv = tape.constant(cb);
            let loss = diffusion_loss(&mut tape, (&model.denoiser, &b), &model.schedule, zv, cv, &draw)?;
            total += tape.value(loss).item()?;
            let grads = tape.backward(loss)?;
            apply(&tape, &grads, &b, &mut model.denoiser.params, &mut adam)?;
        }
        curve.push(EpochLoss {
            train: total / batches.len() as f64,
            monitor: diffusion_objective(model, &zm, &cm, &monitor, MONITOR_BATCH)?,
        });
    }
    Ok(curve)
}

/// Second stage: encoders stay frozen (borrowed immutably), latents are
/// `μ_g` and conditions the text embeddings.
pub fn train_diffusion(
    model: &mut LatentDiffusion,
    gin: &Gin,
    text: &TextEncoder,
    graphs: &[MolGraph],
    tokens: &[Vec<usize>],
    cfg: &DiffusionConfig,
    rng: &mut impl Rng,
) -> Result<Vec<EpochLoss<f64>>> {
    if graphs.len() != tokens.len() {
        return Err(Error::invalid("graphs and captions differ in number"));
    }
    let refs: Vec<&MolGraph> = graphs.iter().collect();
    let (mu, _) = gin.encode(&refs)?;
    let seqs: Vec<&[usize]> = tokens.iter().map(Vec::as_slice).collect();
    let c = text.encode(&seqs)?;
    train_denoiser(model, &mu, &c, cfg, rng)
}

/// Per-epoch means of the joint objective and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLoss {
    pub total: f64,
    pub elbo: f64,
    pub diffusion: f64,
}

/// Single-stage alternative: ELBO and diffusion loss summed and optimized
/// together, the diffusion loss back-propagating into the graph encoder
/// through `μ_g`. The text encoder stays frozen.
#[allow(clippy::too_many_arguments)]
pub fn train_joint(
    gin: &mut Gin,
    dec: &mut Decoder,
    model: &mut LatentDiffusion,
    text: &TextEncoder,
    graphs: &[MolGraph],
    tokens: &[Vec<usize>],
    alpha_kl: f64,
    cfg: &DiffusionConfig,
    rng: &mut impl Rng,
) -> Result<Vec<EpochLoss<JointLoss>>> {
    cfg.validate()?;
    if graphs.is_empty() || graphs.len() != tokens.len() {
        return Err(Error::invalid("joint training needs matching non-empty data"));
    }
    let targets = graphs.iter().map(VaeTarget::new).collect::<Result<Vec<_>>>()?;
    let seqs: Vec<&[usize]> = tokens.iter().map(Vec::as_slice).collect();
    let c = text.encode(&seqs)?;
    let (dz, dc) = (gin.cfg.latent_dim, model.denoiser.cfg.cond_dim);
    let monitor_eps = standard_normal(rng, graphs.len(), dz);
    let monitor_draw = DiffusionDraw::sample(rng, graphs.len(), dz, model.schedule.t_max(), cfg.p_drop);
    let mut adam_g = AdamState::new(&gin.params, cfg.lr);
    let mut adam_d = AdamState::new(&dec.params, cfg.lr);
    let mut adam_n = AdamState::new(&model.denoiser.params, cfg.lr);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = annealed_lr(cfg.lr, epoch, cfg.epochs);
        adam_g.lr = lr;
        adam_d.lr = lr;
        adam_n.lr = lr;
        let mut sums = JointLoss { total: 0.0, elbo: 0.0, diffusion: 0.0 };
        let batches = minibatches(graphs.len(), cfg.batch_size, rng);
        for idx in &batches {
            let gs: Vec<&MolGraph> = idx.iter().map(|&i| &graphs[i]).collect();
            let ts: Vec<&VaeTarget> = idx.iter().map(|&i| &targets[i]).collect();
            let batch = GraphBatch::new(&gs)?;
            let eps = standard_normal(rng, idx.len(), gin.cfg.latent_dim);
            let draw = DiffusionDraw::sample(rng, idx.len(), gin.cfg.latent_dim, model.schedule.t_max(), cfg.p_drop);
            let cb = rows_of(&c, idx, dc)?;
            let mut tape = Tape::new();
            let bg = tape.bind(&gin.params);
            let bd = tape.bind(&dec.params);
            let bn = tape.bind(&model.denoiser.params);
            let (elbo, _, _) = elbo_loss(&mut tape, (gin, &bg), (dec, &bd), &batch, &ts, eps, alpha_kl)?;
            let (mu, _) = gin.forward(&mut tape, &bg, &batch)?;
            let cv = tape.constant(cb);
            let dl = diffusion_loss(&mut tape, (&model.denoiser, &bn), &model.schedule, mu, cv, &draw)?;
            let total = tape.add(elbo, dl)?;
            sums.total += tape.value(total).item()?;
            sums.elbo += tape.value(elbo).item()?;
            sums.diffusion += tape.value(dl).item()?;
            let grads = tape.backward(total)?;
            apply(&tape, &grads, &bg, &mut gin.params, &mut adam_g)?;
            apply(&tape, &grads, &bd, &mut dec.params, &mut adam_d)?;
            apply(&tape, &grads, &bn, &mut model.denoiser.params, &mut adam_n)?;
        }
        let k = batches.len() as f64;
        let train = JointLoss {
            total: sums.total / k,
            elbo: sums.elbo / k,
            diffusion: sums.diffusion / k,
        };
        let monitor = joint_objective(
            (gin, dec, model),
            (graphs, &targets, &c),
            (&monitor_eps, &monitor_draw),
            alpha_kl,
            cfg.batch_size,
        )?;
        curve.push(EpochLoss { train, monitor });
    }
    Ok(curve)
}

fn joint_objective(
    (gin, dec, model): (&Gin, &Decoder, &LatentDiffusion),
    (graphs, targets, c): (&[MolGraph], &[VaeTarget], &[Vec<f64>]),
    (eps, draw): (&Tensor, &DiffusionDraw),
    alpha_kl: f64,
    batch_size: usize,
) -> Result<JointLoss> {
    let batches = fixed_batches(graphs.len(), batch_size);
    let mut sums = JointLoss { total: 0.0, elbo: 0.0, diffusion: 0.0 };
    for idx in &batches {
        let gs: Vec<&MolGraph> = idx.iter().map(|&i| &graphs[i]).collect();
        let ts: Vec<&VaeTarget> = idx.iter().map(|&i| &targets[i]).collect();
        let batch = GraphBatch::new(&gs)?;
        let e = Tensor::matrix(idx.len(), eps.cols(), idx.iter().flat_map(|&i| eps.row_slice(i).to_vec()).collect())?;
        let mut tape = Tape::new();
        let bg = tape.bind_frozen(&gin.params);
        let bd = tape.bind_frozen(&dec.params);
        let bn = tape.bind_frozen(&model.denoiser.params);
        let (elbo, _, _) = elbo_loss(&mut tape, (gin, &bg), (dec, &bd), &batch, &ts, e, alpha_kl)?;
        let (mu, _) = gin.forward(&mut tape, &bg, &batch)?;
        let cv = tape.constant(rows_of(c, idx, model.denoiser.cfg.cond_dim)?);
        let dl = diffusion_loss(&mut tape, (&model.denoiser, &bn), &model.schedule, mu, cv, &draw.select(idx)?)?;
        sums.elbo += tape.value(elbo).item()?;
        sums.diffusion += tape.value(dl).item()?;
    }
    let k = batches.len() as f64;
    Ok(JointLoss {
        total: (sums.elbo + sums.diffusion) / k,
        elbo: sums.elbo / k,
        diffusion: sums.diffusion / k,
    })
}
