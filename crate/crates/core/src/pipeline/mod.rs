//! Ingestion, run configuration, checkpoints, the three training stages,
//! generation, evaluation and the ablation harness.

mod captions;
mod checkpoint;
mod config;
mod dataset;

pub use captions::{caption, caption_clauses, has_ring, make_corpus, stated_ring_property, NO_RING_CAPTION, RING_CAPTION};
pub use checkpoint::{
    decoder_config, denoiser_config, gin_config, text_config, Checkpoint, Lineage, Models, Stage, StageSeed, Trained,
    FORMAT_VERSION,
};
pub use config::{RunConfig, UncondMode};
pub use dataset::{ingest_row, load_dataset, parse_dataset, Dataset, IngestReport, Pair, DATASET_HEADER};

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use chem::{canonical_smiles, check_valence, parse_smiles, MolGraph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoders::{pretrain_align, AlignConfig, Gin, TextEncoder, Vocab};
use crate::evalmetrics::{conditional_metrics, unconditional_metrics, CondEvalReport, MetricConfig, UncondEvalReport};
use crate::genvae::{sample_decode, train_vae, Decoder, LossParts, VaeConfig};
use crate::latentdiff::{chain_rng, train_diffusion, train_joint, Condition, Denoiser, JointLoss, LatentDiffusion, NoiseSchedule};
use crate::training::EpochLoss;
use crate::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("`{}` is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv_text<I, R, S>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(format!("csv: {e}")))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `epoch,loss,monitor` rows for the alignment and diffusion stages.
pub fn scalar_curve_csv(curve: &[EpochLoss<f64>]) -> Result<String> {
    csv_text(
        &["epoch", "loss", "monitor"],
        curve
            .iter()
            .enumerate()
            .map(|(i, l)| [i.to_string(), l.train.to_string(), l.monitor.to_string()]),
    )
}

pub fn vae_curve_csv(curve: &[EpochLoss<LossParts>]) -> Result<String> {
    csv_text(
        &["epoch", "loss", "recon", "kl", "monitor", "monitor_recon", "monitor_kl"],
        curve.iter().enumerate().map(|(i, l)| {
            [
                i.to_string(),
                l.train.total.to_string(),
                l.train.recon.to_string(),
                l.train.kl.to_string(),
                l.monitor.total.to_string(),
                l.monitor.recon.to_string(),
                l.monitor.kl.to_string(),
            ]
        }),
    )
}

pub fn joint_curve_csv(curve: &[EpochLoss<JointLoss>]) -> Result<String> {
    csv_text(
        &["epoch", "loss", "elbo", "diffusion", "monitor", "monitor_elbo", "monitor_diffusion"],
        curve.iter().enumerate().map(|(i, l)| {
            [
                i.to_string(),
                l.train.total.to_string(),
                l.train.elbo.to_string(),
                l.train.diffusion.to_string(),
                l.monitor.total.to_string(),
                l.monitor.elbo.to_string(),
                l.monitor.diffusion.to_string(),
            ]
        }),
    )
}

/// Token ids (pads dropped) of every description.
pub fn tokenize_all(vocab: &Vocab, texts: &[&str]) -> Vec<Vec<usize>> {
    texts.iter().map(|t| vocab.tokenize(t).content().to_vec()).collect()
}

// Independent streams per stage and purpose under one run seed.
fn stage_rng(seed: u64, stage: Stage, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64 * 16 + purpose);
    rng
}

const INIT: u64 = 1;
const TRAIN: u64 = 2;

fn architecture(c: &RunConfig) -> [usize; 11] {
    [
        c.latent_dim,
        c.denoiser_layers,
        c.t_train,
        c.denoiser_hidden,
        c.gin_layers,
        c.gin_hidden,
        c.text_embed_dim,
        c.max_tokens,
        c.decoder_hidden,
        c.decoder_node_dim,
        c.decoder_rank,
    ]
}

fn require<'a>(prior: Option<&'a Trained>, need: Stage, command: &str, cfg: &RunConfig) -> Result<&'a Trained> {
    let missing = || {
        Error::StageOrder(format!(
            "{command} needs a checkpoint from the {} ({need})",
            need.title()
        ))
    };
    let p = prior.ok_or_else(missing)?;
    if p.stage() < need || (need == Stage::Vae && p.lineage.joint) {
        return Err(missing());
    }
    if architecture(&p.config) != architecture(cfg) || p.config.schedule != cfg.schedule {
        return Err(Error::Config {
            line: 0,
            msg: "model sizes differ from the prerequisite checkpoint's config".into(),
        });
    }
    Ok(p)
}

fn non_empty(data: &Dataset) -> Result<()> {
    if data.pairs.is_empty() {
        return Err(Error::Dataset("no usable molecules after ingestion".into()));
    }
    Ok(())
}

fn fresh_encoders(cfg: &RunConfig, vocab: &Vocab, rng: &mut ChaCha8Rng) -> (Gin, TextEncoder) {
    let gin = Gin::new(gin_config(cfg), rng);
    let text = TextEncoder::new(text_config(cfg, vocab), rng);
    (gin, text)
}

/// Pretraining stage: contrastive alignment of fresh encoders.
pub fn run_align(cfg: &RunConfig, data: &Dataset) -> Result<(Trained, Vec<EpochLoss<f64>>)> {
    cfg.validate()?;
    non_empty(data)?;
    let vocab = Vocab::build(data.descriptions(), cfg.max_tokens);
    let (mut gin, mut text) = fresh_encoders(cfg, &vocab, &mut stage_rng(cfg.seed, Stage::Align, INIT));
    let tokens = tokenize_all(&vocab, &data.descriptions());
    let acfg = AlignConfig {
        tau: cfg.tau,
        lr: cfg.lr_align,
        epochs: cfg.epochs_align,
        batch_size: cfg.batch_size,
        symmetric: cfg.symmetric_contrastive,
    };
    let curve = pretrain_align(
        &mut gin,
        &mut text,
        &data.graphs(),
        &tokens,
        &acfg,
        &mut stage_rng(cfg.seed, Stage::Align, TRAIN),
    )?;
    let trained = Trained {
        config: cfg.clone(),
        vocab,
        lineage: Lineage {
            aligned: true,
            joint: false,
            seeds: vec![StageSeed { stage: Stage::Align, seed: cfg.seed }],
        },
        models: Models {
            gin,
            text,
            decoder: None,
            diffusion: None,
        },
    };
    Ok((trained, curve))
}

/// Starting point of a VAE-training stage: the aligned encoders, or fresh
/// random ones for the no-alignment ablation (`prior = None`).
fn vae_start(cfg: &RunConfig, data: &Dataset, prior: Option<&Trained>, command: &str) -> Result<Trained> {
    match prior {
        Some(p) => {
            let p = require(Some(p), Stage::Align, command, cfg)?;
            Ok(Trained {
                config: cfg.clone(),
                vocab: p.vocab.clone(),
                lineage: p.lineage.clone(),
                models: Models {
                    gin: p.models.gin.clone(),
                    text: p.models.text.clone(),
                    decoder: None,
                    diffusion: None,
                },
            })
        }
        None => {
            let vocab = Vocab::build(data.descriptions(), cfg.max_tokens);
            let (gin, text) = fresh_encoders(cfg, &vocab, &mut stage_rng(cfg.seed, Stage::Align, INIT));
            Ok(Trained {
                config: cfg.clone(),
                vocab,
                lineage: Lineage {
                    aligned: false,
                    joint: false,
                    seeds: Vec::new(),
                },
                models: Models {
                    gin,
                    text,
                    decoder: None,
                    diffusion: None,
                },
            })
        }
    }
}

/// First stage: graph VAE on top of the (aligned) graph encoder. With
/// `prior = None` the encoders start untrained.
pub fn run_vae(cfg: &RunConfig, data: &Dataset, prior: Option<&Trained>) -> Result<(Trained, Vec<EpochLoss<LossParts>>)> {
    cfg.validate()?;
    non_empty(data)?;
    let mut t = vae_start(cfg, data, prior, "train-vae")?;
    let mut dec = Decoder::new(decoder_config(cfg), &mut stage_rng(cfg.seed, Stage::Vae, INIT));
    let vcfg = VaeConfig {
        alpha_kl: cfg.alpha_kl,
        lr: cfg.lr_vae,
        epochs: cfg.epochs_vae,
        batch_size: cfg.batch_size,
    };
    let curve = train_vae(
        &mut t.models.gin,
        &mut dec,
        &data.graphs(),
        &vcfg,
        &mut stage_rng(cfg.seed, Stage::Vae, TRAIN),
    )?;
    t.models.decoder = Some(dec);
    t.lineage.seeds.push(StageSeed { stage: Stage::Vae, seed: cfg.seed });
    Ok((t, curve))
}

fn fresh_diffusion(cfg: &RunConfig) -> Result<LatentDiffusion> {
    Ok(LatentDiffusion {
        schedule: NoiseSchedule::new(cfg.schedule, cfg.t_train)?,
        denoiser: Denoiser::new(denoiser_config(cfg), &mut stage_rng(cfg.seed, Stage::Diffusion, INIT))?,
    })
}

/// Second stage: the denoiser over latents of the frozen encoders.
pub fn run_diffusion(cfg: &RunConfig, data: &Dataset, prior: Option<&Trained>) -> Result<(Trained, Vec<EpochLoss<f64>>)> {
    cfg.validate()?;
    non_empty(data)?;
    let p = require(prior, Stage::Vae, "train-diffusion", cfg)?;
    let mut model = fresh_diffusion(cfg)?;
    let tokens = tokenize_all(&p.vocab, &data.descriptions());
    let curve = train_diffusion(
        &mut model,
        &p.models.gin,
        &p.models.text,
        &data.graphs(),
        &tokens,
        &cfg.diffusion(),
        &mut stage_rng(cfg.seed, Stage::Diffusion, TRAIN),
    )?;
    let mut t = p.clone();
    t.config = cfg.clone();
    t.models.diffusion = Some(model);
    t.lineage.seeds.push(StageSeed { stage: Stage::Diffusion, seed: cfg.seed });
    Ok((t, curve))
}

/// Single-stage ablation: VAE and denoiser trained together for
/// `epochs_vae` epochs, from aligned encoders or (`prior = None`) fresh ones.
pub fn run_joint(cfg: &RunConfig, data: &Dataset, prior: Option<&Trained>) -> Result<(Trained, Vec<EpochLoss<JointLoss>>)> {
    cfg.validate()?;
    non_empty(data)?;
    let mut t = vae_start(cfg, data, prior, "train-diffusion --joint")?;
    let mut dec = Decoder::new(decoder_config(cfg), &mut stage_rng(cfg.seed, Stage::Vae, INIT));
    let mut model = fresh_diffusion(cfg)?;
    let tokens = tokenize_all(&t.vocab, &data.descriptions());
    let mut dcfg = cfg.diffusion();
    dcfg.epochs = cfg.epochs_vae;
    dcfg.lr = cfg.lr_vae;
    let curve = train_joint(
        &mut t.models.gin,
        &mut dec,
        &mut model,
        &t.models.text,
        &data.graphs(),
        &tokens,
        cfg.alpha_kl,
        &dcfg,
        &mut stage_rng(cfg.seed, Stage::Diffusion, TRAIN),
    )?;
    t.models.decoder = Some(dec);
    t.models.diffusion = Some(model);
    t.lineage.joint = true;
    t.lineage.seeds.push(StageSeed { stage: Stage::Diffusion, seed: cfg.seed });
    Ok((t, curve))
}

/// One decoded generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Canonical SMILES, empty when decoding produced nothing.
    pub smiles: String,
    pub valid: bool,
    pub graph: Option<MolGraph>,
}

fn decoder_of(t: &Trained) -> Result<&Decoder> {
    t.models
        .decoder
        .as_ref()
        .ok_or_else(|| Error::StageOrder(format!("decoding needs a checkpoint from the {}", Stage::Vae.title())))
}

fn diffusion_of(t: &Trained) -> Result<&LatentDiffusion> {
    t.models.diffusion.as_ref().ok_or_else(|| {
        Error::StageOrder(format!("sampling latents needs a checkpoint from the {}", Stage::Diffusion.title()))
    })
}

/// Decodes latents (repairing valences when configured).
pub fn decode_latents(t: &Trained, latents: &[Vec<f64>]) -> Result<Vec<Sample>> {
    let dec = decoder_of(t)?;
    latents
        .iter()
        .map(|z| match sample_decode(dec, z, t.config.repair) {
            Ok(g) => Ok(Sample {
                smiles: canonical_smiles(&g),
                valid: check_valence(&g),
                graph: Some(g),
            }),
            Err(Error::EmptyMolecule) => Ok(Sample {
                smiles: String::new(),
                valid: false,
                graph: None,
            }),
            Err(e) => Err(e),
        })
        .collect()
}

/// Text embeddings of prompts; prompts without words are rejected.
pub fn encode_prompts(t: &Trained, prompts: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut seqs = Vec::with_capacity(prompts.len());
    for p in prompts {
        let tok = t.vocab.tokenize(p);
        if tok.empty {
            return Err(Error::invalid("empty prompt"));
        }
        seqs.push(tok.content().to_vec());
    }
    let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
    t.models.text.encode(&refs)
}

/// `n` guided samples per prompt.
pub fn generate(t: &Trained, prompts: &[&str], n: usize, w: f64, seed: u64) -> Result<Vec<Vec<Sample>>> {
    generate_counts(t, prompts, &vec![n; prompts.len()], w, seed)
}

/// `counts[p]` guided samples for prompt `p`; chains are numbered
/// consecutively over prompts.
pub fn generate_counts(t: &Trained, prompts: &[&str], counts: &[usize], w: f64, seed: u64) -> Result<Vec<Vec<Sample>>> {
    if prompts.len() != counts.len() {
        return Err(Error::invalid("one sample count per prompt required"));
    }
    let model = diffusion_of(t)?;
    let c = encode_prompts(t, prompts)?;
    let cond: Vec<Condition<'_>> = c
        .iter()
        .zip(counts)
        .flat_map(|(row, &k)| std::iter::repeat_n(Condition::Text(row), k))
        .collect();
    let z = model.sample_latents(&cond, w, t.config.t_sample, seed)?;
    let mut samples = decode_latents(t, &z)?.into_iter();
    Ok(counts.iter().map(|&k| samples.by_ref().take(k).collect()).collect())
}

/// Spreads `total` samples over `prompts` prompts as evenly as possible, earlier prompts first.
pub fn budget_counts(total: usize, prompts: usize) -> Vec<usize> {
    (0..prompts).map(|p| total / prompts + usize::from(p < total % prompts)).collect()
}

/// Unconditional samples: null-condition diffusion, or the standard normal prior.
pub fn sample_uncond(t: &Trained, n: usize, mode: UncondMode, seed: u64) -> Result<Vec<Sample>> {
    let z = match mode {
        UncondMode::Diffusion => {
            let model = diffusion_of(t)?;
            model.sample_latents(&vec![Condition::Null; n], 1.0, t.config.t_sample, seed)?
        }
        UncondMode::Prior => {
            decoder_of(t)?;
            (0..n)
                .map(|i| {
                    let mut rng = chain_rng(seed, i as u64);
                    (0..t.config.latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect()
                })
                .collect()
        }
    };
    decode_latents(t, &z)
}

pub fn generations_csv(prompts: Option<&[&str]>, samples: &[Vec<Sample>]) -> Result<String> {
    match prompts {
        Some(p) => csv_text(
            &["prompt", "sample", "smiles", "valid"],
            samples.iter().zip(p).flat_map(|(row, prompt)| {
                row.iter()
                    .enumerate()
                    .map(move |(i, s)| [prompt.to_string(), i.to_string(), s.smiles.clone(), s.valid.to_string()])
            }),
        ),
        None => csv_text(
            &["sample", "smiles", "valid"],
            samples
                .iter()
                .flatten()
                .enumerate()
                .map(|(i, s)| [i.to_string(), s.smiles.clone(), s.valid.to_string()]),
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Cond,
    Uncond,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cond" => Ok(EvalMode::Cond),
            "uncond" => Ok(EvalMode::Uncond),
            other => Err(Error::invalid(format!("unknown evaluation mode `{other}` (cond | uncond)"))),
        }
    }
}

/// Generations read from CSV, grouped by prompt in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationFile {
    pub prompts: Option<Vec<String>>,
    pub molecules: Vec<Vec<Option<MolGraph>>>,
}

/// Reads a generations CSV. `cond` expects `prompt` and `smiles` columns,
/// `uncond` a `smiles` column and no `prompt` column. Empty or unparseable
/// SMILES are kept as invalid generations.
pub fn read_generations(text: &str, mode: EvalMode) -> Result<GenerationFile> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let err = |e: csv::Error| Error::invalid(format!("generations csv: {e}"));
    let headers = r.headers().map_err(err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let smiles_col = col("smiles").ok_or_else(|| Error::invalid("generations file has no `smiles` column"))?;
    let prompt_col = col("prompt");
    match (mode, prompt_col) {
        (EvalMode::Cond, None) => {
            return Err(Error::invalid(
                "cond evaluation needs a `prompt` column; this looks like an unconditional generations file",
            ))
        }
        (EvalMode::Uncond, Some(_)) => {
            return Err(Error::invalid(
                "uncond evaluation got a file with a `prompt` column; use --mode cond for conditional generations",
            ))
        }
        _ => {}
    }
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut molecules: Vec<Vec<Option<MolGraph>>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(err)?;
        let mol = rec.get(smiles_col).and_then(|s| parse_smiles(s.trim()).ok());
        let key = prompt_col.and_then(|c| rec.get(c)).unwrap_or("").to_string();
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            molecules.push(Vec::new());
            molecules.len() - 1
        });
        molecules[slot].push(mol);
    }
    Ok(GenerationFile {
        prompts: prompt_col.map(|_| order),
        molecules,
    })
}

pub fn metric_config(cfg: &RunConfig) -> MetricConfig {
    MetricConfig {
        samples_per_prompt: cfg.samples_per_prompt,
        pooled_diversity: cfg.pooled_diversity,
        ..MetricConfig::default()
    }
}

/// Conditional report; each prompt's reference is the first dataset row with that description.
pub fn evaluate_cond(gens: &GenerationFile, refs: &Dataset, mcfg: &MetricConfig) -> Result<CondEvalReport> {
    let prompts = gens
        .prompts
        .as_ref()
        .ok_or_else(|| Error::invalid("conditional evaluation needs prompts"))?;
    let mut by_text: HashMap<&str, &MolGraph> = HashMap::new();
    for p in refs.pairs.iter().rev() {
        by_text.insert(p.description.as_str(), &p.graph);
    }
    let references = prompts
        .iter()
        .map(|p| {
            by_text
                .get(p.as_str())
                .map(|g| (*g).clone())
                .ok_or_else(|| Error::invalid(format!("no reference molecule for prompt `{p}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    conditional_metrics(&gens.molecules, &references, mcfg)
}

pub fn evaluate_uncond(gens: &GenerationFile, training: &Dataset) -> Result<UncondEvalReport> {
    let flat: Vec<Option<MolGraph>> = gens.molecules.iter().flatten().cloned().collect();
    unconditional_metrics(&flat, &training.graphs())
}

pub fn prompt_rows_csv(report: &CondEvalReport, prompts: &[String]) -> Result<String> {
    csv_text(
        &["prompt", "generated", "valid", "qualified", "novel", "diversity"],
        report.prompts.iter().map(|r| {
            [
                prompts.get(r.prompt).cloned().unwrap_or_default(),
                r.generated.to_string(),
                r.valid.to_string(),
                r.qualified.to_string(),
                r.novel.to_string(),
                opt(r.diversity),
            ]
        }),
    )
}

pub fn uncond_report_csv(r: &UncondEvalReport) -> Result<String> {
    csv_text(
        &["uniqueness", "novelty", "kl_div_score", "frechet_score", "validity", "total", "valid", "unique"],
        [[
            r.uniqueness.to_string(),
            r.novelty.to_string(),
            opt(r.kl_div_score),
            opt(r.frechet_score),
            r.validity.to_string(),
            r.total.to_string(),
            r.valid.to_string(),
            r.unique.to_string(),
        ]],
    )
}

/// Splits off `frac` of the pairs (at least one, at most all but one) as held-out data.
pub fn split_holdout(data: &Dataset, frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if data.pairs.len() < 2 {
        return Err(Error::Dataset("need at least two pairs to hold some out".into()));
    }
    let mut idx: Vec<usize> = (0..data.pairs.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((data.pairs.len() as f64 * frac).round() as usize).clamp(1, data.pairs.len() - 1);
    let pick = |ids: &[usize]| {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        let pairs: Vec<Pair> = ids.iter().map(|&i| data.pairs[i].clone()).collect();
        Dataset {
            report: IngestReport {
                total: pairs.len(),
                kept: pairs.len(),
                dropped: Default::default(),
            },
            pairs,
        }
    };
    Ok((pick(&idx[k..]), pick(&idx[..k])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Alignment, then the VAE, then the denoiser.
    Full,
    /// Alignment, then VAE and denoiser in one stage.
    Joint,
    /// Random encoders, then the VAE, then the denoiser.
    NoAlign,
    /// Random encoders, VAE and denoiser in one stage.
    Neither,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::Joint, Variant::NoAlign, Variant::Neither];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Joint => "joint",
            Variant::NoAlign => "no_align",
            Variant::Neither => "neither",
        }
    }

    pub fn aligned(self) -> bool {
        matches!(self, Variant::Full | Variant::Joint)
    }

    pub fn two_stage(self) -> bool {
        matches!(self, Variant::Full | Variant::NoAlign)
    }
}

/// Trains one ablation variant end to end.
pub fn train_variant(cfg: &RunConfig, data: &Dataset, v: Variant) -> Result<Trained> {
    let aligned = if v.aligned() { Some(run_align(cfg, data)?.0) } else { None };
    if v.two_stage() {
        let (vae, _) = run_vae(cfg, data, aligned.as_ref())?;
        Ok(run_diffusion(cfg, data, Some(&vae))?.0)
    } else {
        Ok(run_joint(cfg, data, aligned.as_ref())?.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub aligned: bool,
    pub two_stage: bool,
    pub similarity: f64,
    pub novelty: Option<f64>,
    pub diversity: Option<f64>,
    pub validity: f64,
    /// Percentage of generations for ring/no-ring prompts that are valid
    /// and have the stated property.
    pub property_match: Option<f64>,
}

/// Share (in percent) of samples for property-stating prompts that match the property.
pub fn property_match(prompts: &[&str], samples: &[Vec<Sample>]) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (p, row) in prompts.iter().zip(samples) {
        let Some(want) = stated_ring_property(p) else {
            continue;
        };
        for s in row {
            total += 1;
            if s.valid && s.graph.as_ref().is_some_and(|g| has_ring(g) == want) {
                hit += 1;
            }
        }
    }
    (total > 0).then(|| 100.0 * hit as f64 / total as f64)
}

/// Evaluates a trained model on held-out prompts with `samples_per_prompt` samples each.
pub fn evaluate_model(t: &Trained, eval: &Dataset, seed: u64) -> Result<(CondEvalReport, Option<f64>)> {
    let prompts = eval.descriptions();
    let samples = generate(t, &prompts, t.config.samples_per_prompt, t.config.w, seed)?;
    let mols: Vec<Vec<Option<MolGraph>>> = samples
        .iter()
        .map(|row| row.iter().map(|s| s.graph.clone()).collect())
        .collect();
    let report = conditional_metrics(&mols, &eval.graphs(), &metric_config(&t.config))?;
    Ok((report, property_match(&prompts, &samples)))
}

/// Trains every variant on `train` and scores it on `eval`.
pub fn run_ablation(cfg: &RunConfig, train: &Dataset, eval: &Dataset) -> Result<Vec<AblationRow>> {
    Variant::ALL
        .iter()
        .map(|&v| {
            let t = train_variant(cfg, train, v)?;
            let (r, pm) = evaluate_model(&t, eval, cfg.seed)?;
            Ok(AblationRow {
                variant: v,
                aligned: v.aligned(),
                two_stage: v.two_stage(),
                similarity: r.similarity,
                novelty: r.novelty,
                diversity: r.diversity,
                validity: r.validity,
                property_match: pm,
            })
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> Result<String> {
    csv_text(
        &["variant", "aligned", "two_stage", "similarity", "novelty", "diversity", "validity", "property_match"],
        rows.iter().map(|r| {
            [
                r.variant.name().to_string(),
                r.aligned.to_string(),
                r.two_stage.to_string(),
                r.similarity.to_string(),
                opt(r.novelty),
                opt(r.diversity),
                r.validity.to_string(),
                opt(r.property_match),
            ]
        }),
    )
}
