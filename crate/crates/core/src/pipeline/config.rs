use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::latentdiff::{DiffusionConfig, ScheduleKind};
use crate::{Error, Result};

/// How unconditional samples obtain their latents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncondMode {
    /// Reverse diffusion with the null condition.
    Diffusion,
    /// `z ~ N(0, I)` straight into the decoder.
    Prior,
}

impl FromStr for UncondMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusion" => Ok(UncondMode::Diffusion),
            "prior" => Ok(UncondMode::Prior),
            other => Err(Error::invalid(format!("unknown sampling mode `{other}` (diffusion | prior)"))),
        }
    }
}

impl std::fmt::Display for UncondMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UncondMode::Diffusion => "diffusion",
            UncondMode::Prior => "prior",
        })
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScheduleKind::Cosine => "cosine",
            ScheduleKind::Linear => "linear",
        })
    }
}

/// Every knob of a run. Read from flat `key = value` files; `#` starts a
/// comment and unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Latent size of the graph VAE.
    pub latent_dim: usize,
    /// Linear layers in the denoiser MLP.
    pub denoiser_layers: usize,
    #[serde(rename = "T_train")]
    pub t_train: usize,
    #[serde(rename = "T_sample")]
    pub t_sample: usize,
    /// Condition dropout while training the denoiser.
    pub p_drop: f64,
    /// KL weight in the ELBO.
    pub alpha_kl: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// Guidance weight at generation time.
    pub w: f64,
    pub lr_align: f64,
    pub lr_vae: f64,
    pub lr_diffusion: f64,
    pub epochs_align: usize,
    pub epochs_vae: usize,
    pub epochs_diffusion: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Valence repair after decoding.
    pub repair: bool,
    pub schedule: ScheduleKind,
    pub denoiser_hidden: usize,
    pub gin_layers: usize,
    pub gin_hidden: usize,
    pub text_embed_dim: usize,
    pub max_tokens: usize,
    pub decoder_hidden: usize,
    pub decoder_node_dim: usize,
    pub decoder_rank: usize,
    /// Average the text-to-graph direction into the contrastive loss.
    pub symmetric_contrastive: bool,
    pub samples_per_prompt: usize,
    pub uncond_mode: UncondMode,
    pub pooled_diversity: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            latent_dim: 24,
            denoiser_layers: 4,
            t_train: 100,
            t_sample: 50,
            p_drop: 0.1,
            alpha_kl: 0.1,
            tau: 0.1,
            w: 2.0,
            lr_align: 1e-3,
            lr_vae: 2e-3,
            lr_diffusion: 1e-3,
            epochs_align: 40,
            epochs_vae: 150,
            epochs_diffusion: 200,
            batch_size: 32,
            seed: 0,
            repair: true,
            schedule: ScheduleKind::Cosine,
            denoiser_hidden: 256,
            gin_layers: 3,
            gin_hidden: 64,
            text_embed_dim: 32,
            max_tokens: 64,
            decoder_hidden: 256,
            decoder_node_dim: 32,
            decoder_rank: 8,
            symmetric_contrastive: false,
            samples_per_prompt: 5,
            uncond_mode: UncondMode::Diffusion,
            pooled_diversity: false,
        }
    }
}

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        line,
        msg: format!("cannot parse `{v}` for `{key}`"),
    })
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::Config {
                    line,
                    msg: format!("expected `key = value`, got `{body}`"),
                });
            };
            let (key, v) = (key.trim(), value.trim());
            match key {
                "latent_dim" => c.latent_dim = parse(line, key, v)?,
                "denoiser_layers" => c.denoiser_layers = parse(line, key, v)?,
                "T_train" => c.t_train = parse(line, key, v)?,
                "T_sample" => c.t_sample = parse(line, key, v)?,
                "p_drop" => c.p_drop = parse(line, key, v)?,
                "alpha_kl" => c.alpha_kl = parse(line, key, v)?,
                "tau" => c.tau = parse(line, key, v)?,
                "w" => c.w = parse(line, key, v)?,
                "lr_align" => c.lr_align = parse(line, key, v)?,
                "lr_vae" => c.lr_vae = parse(line, key, v)?,
                "lr_diffusion" => c.lr_diffusion = parse(line, key, v)?,
                "epochs_align" => c.epochs_align = parse(line, key, v)?,
                "epochs_vae" => c.epochs_vae = parse(line, key, v)?,
                "epochs_diffusion" => c.epochs_diffusion = parse(line, key, v)?,
                "batch_size" => c.batch_size = parse(line, key, v)?,
                "seed" => c.seed = parse(line, key, v)?,
                "repair" => c.repair = parse(line, key, v)?,
                "schedule" => {
                    c.schedule = v.parse().map_err(|e: Error| Error::Config { line, msg: e.to_string() })?
                }
                "denoiser_hidden" => c.denoiser_hidden = parse(line, key, v)?,
                "gin_layers" => c.gin_layers = parse(line, key, v)?,
                "gin_hidden" => c.gin_hidden = parse(line, key, v)?,
                "text_embed_dim" => c.text_embed_dim = parse(line, key, v)?,
                "max_tokens" => c.max_tokens = parse(line, key, v)?,
                "decoder_hidden" => c.decoder_hidden = parse(line, key, v)?,
                "decoder_node_dim" => c.decoder_node_dim = parse(line, key, v)?,
                "decoder_rank" => c.decoder_rank = parse(line, key, v)?,
                "symmetric_contrastive" => c.symmetric_contrastive = parse(line, key, v)?,
                "samples_per_prompt" => c.samples_per_prompt = parse(line, key, v)?,
                "uncond_mode" => {
                    c.uncond_mode = v.parse().map_err(|e: Error| Error::Config { line, msg: e.to_string() })?
                }
                "pooled_diversity" => c.pooled_diversity = parse(line, key, v)?,
                other => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        if self.t_sample == 0 || self.t_sample > self.t_train {
            return bad(format!("T_sample = {} must lie in 1..=T_train = {}", self.t_sample, self.t_train));
        }
        if !(0.0..=1.0).contains(&self.p_drop) {
            return bad(format!("p_drop = {} outside [0, 1]", self.p_drop));
        }
        if self.tau <= 0.0 {
            return bad("tau must be positive".into());
        }
        if self.denoiser_layers < 2 {
            return bad("denoiser_layers must be at least 2".into());
        }
        for (k, v) in [
            ("latent_dim", self.latent_dim),
            ("batch_size", self.batch_size),
            ("gin_layers", self.gin_layers),
            ("gin_hidden", self.gin_hidden),
            ("text_embed_dim", self.text_embed_dim),
            ("max_tokens", self.max_tokens),
            ("decoder_hidden", self.decoder_hidden),
            ("decoder_node_dim", self.decoder_node_dim),
            ("decoder_rank", self.decoder_rank),
            ("denoiser_hidden", self.denoiser_hidden),
            ("samples_per_prompt", self.samples_per_prompt),
        ] {
            if v == 0 {
                return bad(format!("{k} must be positive"));
            }
        }
        Ok(())
    }

    /// The file form; [`RunConfig::parse_str`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        kv("latent_dim", self.latent_dim.to_string());
        kv("denoiser_layers", self.denoiser_layers.to_string());
        kv("T_train", self.t_train.to_string());
        kv("T_sample", self.t_sample.to_string());
        kv("p_drop", self.p_drop.to_string());
        kv("alpha_kl", self.alpha_kl.to_string());
        kv("tau", self.tau.to_string());
        kv("w", self.w.to_string());
        kv("lr_align", self.lr_align.to_string());
        kv("lr_vae", self.lr_vae.to_string());
        kv("lr_diffusion", self.lr_diffusion.to_string());
        kv("epochs_align", self.epochs_align.to_string());
        kv("epochs_vae", self.epochs_vae.to_string());
        kv("epochs_diffusion", self.epochs_diffusion.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("seed", self.seed.to_string());
        kv("repair", self.repair.to_string());
        kv("schedule", self.schedule.to_string());
        kv("denoiser_hidden", self.denoiser_hidden.to_string());
        kv("gin_layers", self.gin_layers.to_string());
        kv("gin_hidden", self.gin_hidden.to_string());
        kv("text_embed_dim", self.text_embed_dim.to_string());
        kv("max_tokens", self.max_tokens.to_string());
        kv("decoder_hidden", self.decoder_hidden.to_string());
        kv("decoder_node_dim", self.decoder_node_dim.to_string());
        kv("decoder_rank", self.decoder_rank.to_string());
        kv("symmetric_contrastive", self.symmetric_contrastive.to_string());
        kv("samples_per_prompt", self.samples_per_prompt.to_string());
        kv("uncond_mode", self.uncond_mode.to_string());
        kv("pooled_diversity", self.pooled_diversity.to_string());
        s
    }

    pub fn diffusion(&self) -> DiffusionConfig {
        DiffusionConfig {
            t_train: self.t_train,
            t_sample: self.t_sample,
            p_drop: self.p_drop,
            w: self.w,
            schedule: self.schedule,
            lr: self.lr_diffusion,
            epochs: self.epochs_diffusion,
            batch_size: self.batch_size,
        }
    }
}
