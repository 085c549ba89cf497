#![allow(dead_code)]

use chem::{parse_smiles, MolGraph};
use molgen::encoders::{contrastive_loss, Gin, GinConfig, GraphBatch, TextEncoder, TextEncoderConfig};
use molgen::genvae::{
    decode_loss, elbo_loss, kl_to_standard_normal, reconstruction_loss, target_pairs, Decoder, DecoderConfig, VaeTarget,
    EDGE_CLASSES, N_MAX, SLOT_CLASSES,
};
use molgen::latentdiff::{diffusion_loss, Denoiser, DenoiserConfig, DiffusionDraw, NoiseSchedule, ScheduleKind};
use numcore::{check_params_fn, check_tensor_fn, init, Params, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-4;
// ReLU networks are only piecewise smooth; a step of 1e-5 can straddle a
// kink at an otherwise ordinary random point
const EPS: f64 = 1e-6;
const POINTS: u64 = 10;

fn graphs() -> Vec<MolGraph> {
    ["CCO", "c1ccccc1O", "C#CC(=O)N"].iter().map(|s| parse_smiles(s).unwrap()).collect()
}

/// Fixed random weights dotted with the output, so every coordinate matters.
fn project(tape: &mut Tape, y: Var, seed: u64) -> numcore::Result<Var> {
    let shape = tape.value(y).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let r = Tensor::new(shape.clone(), (0..shape.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let rv = tape.constant(r);
    let p = tape.mul(y, rv)?;
    tape.sum(p)
}

/// Moves every parameter (biases included) off its initial value.
fn jitter(params: &mut Params, rng: &mut ChaCha8Rng) {
    let flat: Vec<f64> = params.flatten().iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
    params.assign_flat(&flat).unwrap();
}

fn worst(errs: impl Iterator<Item = f64>) -> f64 {
    errs.fold(0.0, f64::max)
}

pub fn contrastive_loss_input_gradients() -> f64 {
    worst([false, true].into_iter().map(|symmetric| {
        worst((0..POINTS).map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(p);
            let z = init::normal_matrix(&mut rng, 4, 5, 1.0);
            let c = init::normal_matrix(&mut rng, 4, 5, 1.0);
            let ez = check_tensor_fn(
                |t, zv| {
                    let cv = t.constant(c.clone());
                    Ok(contrastive_loss(t, zv, cv, 0.1, symmetric).unwrap())
                },
                &z,
                EPS,
            )
            .unwrap();
            let ec = check_tensor_fn(
                |t, cv| {
                    let zv = t.constant(z.clone());
                    Ok(contrastive_loss(t, zv, cv, 0.1, symmetric).unwrap())
                },
                &c,
                EPS,
            )
            .unwrap();
            ez.max(ec)
        }))
    }))
}

pub fn kl_term_gradients() -> f64 {
    worst((0..POINTS).map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + p);
        let mu = init::normal_matrix(&mut rng, 3, 4, 1.0);
        let sigma = Tensor::from_fn(3, 4, |_, _| rng.random_range(0.3..2.0));
        let em = check_tensor_fn(
            |t, m| {
                let s = t.constant(sigma.clone());
                Ok(kl_to_standard_normal(t, m, s).unwrap())
            },
            &mu,
            EPS,
        )
        .unwrap();
        let es = check_tensor_fn(
            |t, s| {
                let m = t.constant(mu.clone());
                Ok(kl_to_standard_normal(t, m, s).unwrap())
            },
            &sigma,
            EPS,
        )
        .unwrap();
        em.max(es)
    }))
}

pub fn reconstruction_term_gradients() -> f64 {
    let gs = graphs();
    let targets: Vec<VaeTarget> = gs.iter().map(|g| VaeTarget::new(g).unwrap()).collect();
    let refs: Vec<&VaeTarget> = targets.iter().collect();
    let pairs = target_pairs(&refs).left.len();
    worst((0..POINTS).map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + p);
        let nodes = init::normal_matrix(&mut rng, gs.len() * N_MAX, SLOT_CLASSES, 1.0);
        let edges = init::normal_matrix(&mut rng, pairs, EDGE_CLASSES, 1.0);
        let en = check_tensor_fn(
            |t, n| {
                let ev = t.constant(edges.clone());
                Ok(reconstruction_loss(t, n, Some(ev), &refs).unwrap())
            },
            &nodes,
            EPS,
        )
        .unwrap();
        let ee = check_tensor_fn(
            |t, ev| {
                let n = t.constant(nodes.clone());
                Ok(reconstruction_loss(t, n, Some(ev), &refs).unwrap())
            },
            &edges,
            EPS,
        )
        .unwrap();
        en.max(ee)
    }))
}

fn small_gin(rng: &mut ChaCha8Rng) -> Gin {
    let mut g = Gin::new(
        GinConfig {
            layers: 2,
            hidden: 6,
            latent_dim: 3,
        },
        rng,
    );
    jitter(&mut g.params, rng);
    g
}

fn small_decoder(rng: &mut ChaCha8Rng) -> Decoder {
    let mut d = Decoder::new(
        DecoderConfig {
            latent_dim: 3,
            hidden: 5,
            node_dim: 3,
            rank: 2,
        },
        rng,
    );
    jitter(&mut d.params, rng);
    d
}

pub fn gin_parameter_gradients() -> f64 {
    let gs = graphs();
    let refs: Vec<&MolGraph> = gs.iter().collect();
    let batch = GraphBatch::new(&refs).unwrap();
    worst((0..POINTS).map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + p);
        let gin = small_gin(&mut rng);
        check_params_fn(
            |t, b| {
                let (mu, sigma) = gin.forward(t, b, &batch).unwrap();
                let both = t.concat_cols(&[mu, sigma])?;
                project(t, both, p)
            },
            &gin.params,
            EPS,
        )
        .unwrap()
    }))
}

pub fn text_encoder_parameter_gradients() -> f64 {
    let seqs: Vec<Vec<usize>> = vec![vec![2, 3, 4, 0, 0], vec![5, 2, 6, 7, 3], vec![4, 0, 0, 0, 0]];
    let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
    worst((0..POINTS).map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + p);
        let mut text = TextEncoder::new(
            TextEncoderConfig {
                vocab_size: 8,
                embed_dim: 4,
                out_dim: 3,
            },
            &mut rng,
        );
        jitter(&mut text.params, &mut rng);
        check_params_fn(
            |t, b| {
                let c = text.forward(t, b, &refs).unwrap();
                project(t, c, p)
            },
            &text.params,
            EPS,
        )
        .unwrap()
    }))
}

pub fn decoder_parameter_gradients() -> f64 {
    let gs = graphs();
    let targets: Vec<VaeTarget> = gs.iter().map(|g| VaeTarget::new(g).unwrap()).collect();
    let refs: Vec<&VaeTarget> = targets.iter().collect();
    worst((0..POINTS).map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + p);
        let dec = small_decoder(&mut rng);
        let z = init::normal_matrix(&mut rng, gs.len(), 3, 1.0);
        let ep = check_params_fn(
            |t, b| {
                let zv = t.constant(z.clone());
                Ok(decode_loss(t, (&dec, b), zv, &refs).unwrap())
            },
            &dec.params,
            EPS,
        )
        .unwrap();
        let ez = check_tensor_fn(
            |t, zv| {
                let b = t.bind_frozen(&dec.params);
                Ok(decode_loss(t, (&dec, &b), zv, &refs).unwrap())
            },
            &z,
            EPS,
        )
        .unwrap();
        ep.max(ez)
    }))
}

pub fn elbo_gradients_through_both_networks() -> f64 {
    let gs = graphs();
    let grefs: Vec<&MolGraph> = gs.iter().collect();
    let batch = GraphBatch::new(&grefs).unwrap();
    let targets: Vec<VaeTarget> = gs.iter().map(|g| VaeTarget::new(g).unwrap()).collect();
    let refs: Vec<&VaeTarget> = targets.iter().collect();
    worst((0..POINTS).map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + p);
        let gin = small_gin(&mut rng);
        let dec = small_decoder(&mut rng);
        let eps = init::normal_matrix(&mut rng, gs.len(), 3, 1.0);
        let eg = check_params_fn(
            |t, bg| {
                let bd = t.bind_frozen(&dec.params);
                Ok(elbo_loss(t, (&gin, bg), (&dec, &bd), &batch, &refs, eps.clone(), 0.5).unwrap().0)
            },
            &gin.params,
            EPS,
        )
        .unwrap();
        let ed = check_params_fn(
            |t, bd| {
                let bg = t.bind_frozen(&gin.params);
                Ok(elbo_loss(t, (&gin, &bg), (&dec, bd), &batch, &refs, eps.clone(), 0.5).unwrap().0)
            },
            &dec.params,
            EPS,
        )
        .unwrap();
        eg.max(ed)
    }))
}

fn small_denoiser(rng: &mut ChaCha8Rng) -> Denoiser {
    let mut d = Denoiser::new(
        DenoiserConfig {
            latent_dim: 3,
            cond_dim: 2,
            hidden: 6,
            layers: 3,
        },
        rng,
    )
    .unwrap();
    jitter(&mut d.params, rng);
    d
}

pub fn denoiser_parameter_gradients() -> f64 {
    worst((0..POINTS).map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + p);
        let den = small_denoiser(&mut rng);
        let zt = init::normal_matrix(&mut rng, 4, 3, 1.0);
        let c = init::normal_matrix(&mut rng, 4, 2, 1.0);
        let t: Vec<usize> = (0..4).map(|_| rng.random_range(1..=100)).collect();
        let dropped = [false, true, false, true];
        check_params_fn(
            |tape, b| {
                let zv = tape.constant(zt.clone());
                let cv = tape.constant(c.clone());
                let y = den.forward(tape, b, zv, &t, Some(cv), &dropped).unwrap();
                project(tape, y, p)
            },
            &den.params,
            EPS,
        )
        .unwrap()
    }))
}

pub fn diffusion_loss_gradients() -> f64 {
    let schedule = NoiseSchedule::new(ScheduleKind::Cosine, 100).unwrap();
    worst((0..POINTS).map(|p| {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + p);
        let den = small_denoiser(&mut rng);
        let z = init::normal_matrix(&mut rng, 4, 3, 1.0);
        let c = init::normal_matrix(&mut rng, 4, 2, 1.0);
        let draw = DiffusionDraw::sample(&mut rng, 4, 3, 100, 0.5);
        let ep = check_params_fn(
            |t, b| {
                let zv = t.constant(z.clone());
                let cv = t.constant(c.clone());
                Ok(diffusion_loss(t, (&den, b), &schedule, zv, cv, &draw).unwrap())
            },
            &den.params,
            EPS,
        )
        .unwrap();
        // the latent enters both the noised input and the regression target
        let ez = check_tensor_fn(
            |t, zv| {
                let b = t.bind_frozen(&den.params);
                let cv = t.constant(c.clone());
                Ok(diffusion_loss(t, (&den, &b), &schedule, zv, cv, &draw).unwrap())
            },
            &z,
            EPS,
        )
        .unwrap();
        let ec = check_tensor_fn(
            |t, cv| {
                let b = t.bind_frozen(&den.params);
                let zv = t.constant(z.clone());
                Ok(diffusion_loss(t, (&den, &b), &schedule, zv, cv, &draw).unwrap())
            },
            &c,
            EPS,
        )
        .unwrap();
        ep.max(ez).max(ec)
    }))
}

type Case = (&'static str, fn() -> f64);

pub const ALL: [Case; 9] = [
    ("contrastive loss", contrastive_loss_input_gradients),
    ("KL term", kl_term_gradients),
    ("reconstruction term", reconstruction_term_gradients),
    ("ELBO", elbo_gradients_through_both_networks),
    ("diffusion loss", diffusion_loss_gradients),
    ("GIN", gin_parameter_gradients),
    ("text encoder", text_encoder_parameter_gradients),
    ("decoder", decoder_parameter_gradients),
    ("denoiser", denoiser_parameter_gradients),
];
