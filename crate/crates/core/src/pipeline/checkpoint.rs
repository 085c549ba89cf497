use std::collections::BTreeMap;
use std::path::Path;

use numcore::{Params, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::write_atomic;
use crate::encoders::{Gin, GinConfig, TextEncoder, TextEncoderConfig, Vocab};
use crate::genvae::{Decoder, DecoderConfig};
use crate::latentdiff::{Denoiser, DenoiserConfig, LatentDiffusion, NoiseSchedule};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Align,
    Vae,
    Diffusion,
}

impl Stage {
    /// Name of the training stage that produces this checkpoint.
    pub fn title(self) -> &'static str {
        match self {
            Stage::Align => "Pretraining Stage",
            Stage::Vae => "First Stage",
            Stage::Diffusion => "Second Stage",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Align => "align",
            Stage::Vae => "vae",
            Stage::Diffusion => "diffusion",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeed {
    pub stage: Stage,
    pub seed: u64,
}

/// How the checkpoint's models came to be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    /// Contrastive pretraining ran (otherwise encoders started random).
    pub aligned: bool,
    /// VAE and denoiser were trained together in one stage.
    pub joint: bool,
    pub seeds: Vec<StageSeed>,
}

type ParamMap = BTreeMap<String, Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub stage: Stage,
    pub lineage: Lineage,
    pub config: RunConfig,
    pub vocab: Vocab,
    pub params: BTreeMap<String, ParamMap>,
}

/// Models held by a checkpoint; later stages add the decoder and diffusion model.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub gin: Gin,
    pub text: TextEncoder,
    pub decoder: Option<Decoder>,
    pub diffusion: Option<LatentDiffusion>,
}

/// Everything a checkpoint stores, in live form.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub config: RunConfig,
    pub vocab: Vocab,
    pub lineage: Lineage,
    pub models: Models,
}

impl Trained {
    pub fn stage(&self) -> Stage {
        if self.models.diffusion.is_some() {
            Stage::Diffusion
        } else if self.models.decoder.is_some() {
            Stage::Vae
        } else {
            Stage::Align
        }
    }
}

pub fn gin_config(c: &RunConfig) -> GinConfig {
    GinConfig {
        layers: c.gin_layers,
        hidden: c.gin_hidden,
        latent_dim: c.latent_dim,
    }
}

pub fn text_config(c: &RunConfig, vocab: &Vocab) -> TextEncoderConfig {
    TextEncoderConfig {
        vocab_size: vocab.len(),
        embed_dim: c.text_embed_dim,
        out_dim: c.latent_dim,
    }
}

pub fn decoder_config(c: &RunConfig) -> DecoderConfig {
    DecoderConfig {
        latent_dim: c.latent_dim,
        hidden: c.decoder_hidden,
        node_dim: c.decoder_node_dim,
        rank: c.decoder_rank,
    }
}

pub fn denoiser_config(c: &RunConfig) -> DenoiserConfig {
    DenoiserConfig {
        latent_dim: c.latent_dim,
        cond_dim: c.latent_dim,
        hidden: c.denoiser_hidden,
        layers: c.denoiser_layers,
    }
}

fn export(params: &Params) -> Result<ParamMap> {
    params
        .iter()
        .map(|(name, t)| {
            let rows = match t.shape().len() {
                2 => (0..t.rows()).map(|i| t.row_slice(i).to_vec()).collect(),
                0 | 1 => vec![t.data().to_vec()],
                _ => return Err(Error::Checkpoint(format!("parameter `{name}` has more than two axes"))),
            };
            Ok((name.to_string(), rows))
        })
        .collect()
}

fn import(params: &mut Params, map: &ParamMap, model: &str) -> Result<()> {
    if map.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "`{model}` stores {} parameters, the configured model has {}",
            map.len(),
            params.len()
        )));
    }
    let names: Vec<String> = params.names().to_vec();
    for (k, name) in names.into_iter().enumerate() {
        let rows = map
            .get(&name)
            .ok_or_else(|| Error::Checkpoint(format!("`{model}` lacks parameter `{name}`")))?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Checkpoint(format!("parameter `{name}` has ragged rows")));
        }
        let shape = params.tensors()[k].shape().to_vec();
        let expect_rows = if shape.len() == 2 { shape[0] } else { 1 };
        if rows.len() != expect_rows {
            return Err(Error::Checkpoint(format!(
                "parameter `{name}` has {} rows, expected {expect_rows}",
                rows.len()
            )));
        }
        let t = Tensor::new(shape, rows.concat())
            .map_err(|e| Error::Checkpoint(format!("parameter `{name}`: {e}")))?;
        params
            .replace(&name, t)
            .map_err(|e| Error::Checkpoint(format!("parameter `{name}`: {e}")))?;
    }
    Ok(())
}

impl Checkpoint {
    pub fn new(trained: &Trained) -> Result<Self> {
        let models = &trained.models;
        let mut params = BTreeMap::new();
        params.insert("gin".to_string(), export(&models.gin.params)?);
        params.insert("text".to_string(), export(&models.text.params)?);
        if let Some(d) = &models.decoder {
            params.insert("decoder".to_string(), export(&d.params)?);
        }
        if let Some(m) = &models.diffusion {
            params.insert("denoiser".to_string(), export(&m.denoiser.params)?);
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            stage: trained.stage(),
            lineage: trained.lineage.clone(),
            config: trained.config.clone(),
            vocab: trained.vocab.clone(),
            params,
        })
    }

    fn part(&self, name: &str) -> Result<&ParamMap> {
        self.params
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("{} checkpoint has no `{name}` parameters", self.stage)))
    }

    /// Rebuilds the stored models from the config and parameter arrays.
    pub fn trained(&self) -> Result<Trained> {
        let c = &self.config;
        // initial values are overwritten below
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut gin = Gin::new(gin_config(c), &mut rng);
        import(&mut gin.params, self.part("gin")?, "gin")?;
        let mut text = TextEncoder::new(text_config(c, &self.vocab), &mut rng);
        import(&mut text.params, self.part("text")?, "text")?;
        let decoder = if self.stage >= Stage::Vae {
            let mut d = Decoder::new(decoder_config(c), &mut rng);
            import(&mut d.params, self.part("decoder")?, "decoder")?;
            Some(d)
        } else {
            None
        };
        let diffusion = if self.stage >= Stage::Diffusion {
            let mut den = Denoiser::new(denoiser_config(c), &mut rng)?;
            import(&mut den.params, self.part("denoiser")?, "denoiser")?;
            Some(LatentDiffusion {
                schedule: NoiseSchedule::new(c.schedule, c.t_train)?,
                denoiser: den,
            })
        } else {
            None
        };
        Ok(Trained {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            lineage: self.lineage.clone(),
            models: Models {
                gin,
                text,
                decoder,
                diffusion,
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let json_err = |e: serde_json::Error| Error::Json {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        };
        let header: Header = serde_json::from_str(text).map_err(json_err)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: header.format_version,
                expected: FORMAT_VERSION,
            });
        }
        serde_json::from_str(text).map_err(json_err)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}
