use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use molgen::pipeline::{
    ablation_csv, scalar_curve_csv, budget_counts, evaluate_cond, evaluate_uncond, generate_counts, generations_csv,
    joint_curve_csv, load_dataset, make_corpus, prompt_rows_csv, read_generations, run_ablation, run_align,
    run_diffusion, run_joint, run_vae, sample_uncond, split_holdout, uncond_report_csv, vae_curve_csv, write_atomic,
    Checkpoint, EvalMode, RunConfig, Trained, UncondMode,
};
use molgen::{Error, Result};

#[derive(Parser)]
#[command(name = "molgen", version, about = "Text-conditioned molecular graph generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainArgs {
    /// Paired `smiles<TAB>description` TSV.
    #[arg(long)]
    data: PathBuf,
    /// `key = value` run config; defaults to the prerequisite checkpoint's
    /// config, or built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Where the checkpoint is written.
    #[arg(long)]
    out: PathBuf,
    /// Loss curve CSV (default: next to the checkpoint).
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a captioned TSV corpus from a SMILES list.
    MakeCorpus {
        #[arg(long)]
        smiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validates a dataset and prints the ingestion report.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Contrastive pretraining of the text and graph encoders.
    PretrainAlign {
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Trains the graph VAE on top of the aligned encoder.
    TrainVae {
        #[command(flatten)]
        train: TrainArgs,
        /// Alignment checkpoint.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Ablation: start from untrained encoders instead.
        #[arg(long, conflicts_with = "from")]
        no_align: bool,
    },
    /// Trains the conditional denoiser on frozen encoders.
    TrainDiffusion {
        #[command(flatten)]
        train: TrainArgs,
        /// VAE checkpoint, or the alignment checkpoint with `--joint`.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Ablation: train the VAE and denoiser together in one stage.
        #[arg(long)]
        joint: bool,
        /// With `--joint`: start from untrained encoders.
        #[arg(long, requires = "joint", conflicts_with = "from")]
        no_align: bool,
    },
    /// Text-guided sampling.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Prompt text; repeatable.
        #[arg(long)]
        prompt: Vec<String>,
        /// File with one prompt per line.
        #[arg(long)]
        prompts_file: Option<PathBuf>,
        /// Samples per prompt.
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Total sample budget spread over the prompts (replaces `--n`).
        #[arg(long)]
        total: Option<usize>,
        /// Guidance weight (default: the checkpoint config's).
        #[arg(long)]
        w: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output; SMILES always go to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unconditional sampling.
    SampleUncond {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// `diffusion` (null condition) or `prior` (z ~ N(0, I)); default from config.
        #[arg(long)]
        mode: Option<UncondMode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scores a generations CSV.
    Evaluate {
        #[arg(long)]
        mode: EvalMode,
        #[arg(long)]
        generations: PathBuf,
        /// Dataset TSV: prompt references (cond) or the training set (uncond).
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report; a CSV with the same stem is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains all ablation variants and writes a comparison report.
    Ablation {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fraction of pairs held out as evaluation prompts.
        #[arg(long, default_value_t = 0.1)]
        holdout: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn with_ext(path: &Path, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{ext}"))
}

fn config_for(train: &TrainArgs, prior: Option<&Trained>) -> Result<RunConfig> {
    let mut cfg = match (&train.config, prior) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(t)) => t.config.clone(),
        (None, None) => RunConfig::default(),
    };
    if let Some(s) = train.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_trained(path: &Path) -> Result<Trained> {
    Checkpoint::load(path)?.trained()
}

fn finish_training(train: &TrainArgs, trained: &Trained, curve_csv: String) -> Result<()> {
    Checkpoint::new(trained)?.save(&train.out)?;
    let curve = train.curve.clone().unwrap_or_else(|| with_ext(&train.out, "loss.csv"));
    write_atomic(&curve, curve_csv.as_bytes())?;
    eprintln!(
        "wrote {} ({} checkpoint) and {}",
        train.out.display(),
        trained.stage(),
        curve.display()
    );
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::invalid(e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeCorpus { smiles, out, seed } => {
            let tsv = make_corpus(&read(&smiles)?, &mut ChaCha8Rng::seed_from_u64(seed))?;
            write_atomic(&out, tsv.as_bytes())?;
            eprintln!("wrote {}", out.display());
        }
        Command::Ingest { data, report } => {
            let d = load_dataset(&data)?;
            let json = to_json(&d.report)?;
            println!("{json}");
            if let Some(p) = report {
                write_atomic(&p, json.as_bytes())?;
            }
        }
        Command::PretrainAlign { train } => {
            let cfg = config_for(&train, None)?;
            let data = load_dataset(&train.data)?;
            let (t, curve) = run_align(&cfg, &data)?;
            finish_training(&train, &t, scalar_curve_csv(&curve)?)?;
        }
        Command::TrainVae { train, from, no_align } => {
            let prior = from.as_deref().map(load_trained).transpose()?;
            if prior.is_none() && !no_align {
                return Err(Error::StageOrder(
                    "train-vae needs a checkpoint from the Pretraining Stage (--from align.json), or --no-align".into(),
                ));
            }
            let cfg = config_for(&train, prior.as_ref())?;
            let data = load_dataset(&train.data)?;
            let (t, curve) = run_vae(&cfg, &data, prior.as_ref())?;
            finish_training(&train, &t, vae_curve_csv(&curve)?)?;
        }
        Command::TrainDiffusion {
            train,
            from,
            joint,
            no_align,
        } => {
            let prior = from.as_deref().map(load_trained).transpose()?;
            let cfg = config_for(&train, prior.as_ref())?;
            let data = load_dataset(&train.data)?;
            if joint {
                if prior.is_none() && !no_align {
                    return Err(Error::StageOrder(
                        "train-diffusion --joint needs a checkpoint from the Pretraining Stage, or --no-align".into(),
                    ));
                }
                let (t, curve) = run_joint(&cfg, &data, prior.as_ref())?;
                finish_training(&train, &t, joint_curve_csv(&curve)?)?;
            } else {
                let (t, curve) = run_diffusion(&cfg, &data, prior.as_ref())?;
                finish_training(&train, &t, scalar_curve_csv(&curve)?)?;
            }
        }
        Command::Generate {
            checkpoint,
            prompt,
            prompts_file,
            n,
            total,
            w,
            seed,
            out,
        } => {
            let t = load_trained(&checkpoint)?;
            let mut prompts = prompt;
            if let Some(f) = prompts_file {
                prompts.extend(read(&f)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from));
            }
            if prompts.is_empty() || prompts.iter().any(|p| p.trim().is_empty()) {
                return Err(Error::invalid("empty prompt"));
            }
            let refs: Vec<&str> = prompts.iter().map(String::as_str).collect();
            let counts = match total {
                Some(k) => budget_counts(k, refs.len()),
                None => vec![n; refs.len()],
            };
            let samples = generate_counts(&t, &refs, &counts, w.unwrap_or(t.config.w), seed)?;
            for (p, row) in refs.iter().zip(&samples) {
                for s in row {
                    println!("{}\t{}\t{}", s.smiles, if s.valid { "valid" } else { "invalid" }, p);
                }
            }
            if let Some(path) = out {
                write_atomic(&path, generations_csv(Some(&refs), &samples)?.as_bytes())?;
            }
        }
        Command::SampleUncond {
            checkpoint,
            n,
            mode,
            seed,
            out,
        } => {
            let t = load_trained(&checkpoint)?;
            let mode = mode.unwrap_or(t.config.uncond_mode);
            eprintln!("sampling {n} latents in {mode} mode");
            let samples = sample_uncond(&t, n, mode, seed)?;
            for s in &samples {
                println!("{}\t{}", s.smiles, if s.valid { "valid" } else { "invalid" });
            }
            if let Some(path) = out {
                write_atomic(&path, generations_csv(None, &[samples])?.as_bytes())?;
            }
        }
        Command::Evaluate {
            mode,
            generations,
            references,
            config,
            out,
        } => {
            let cfg = config.as_deref().map(RunConfig::load).transpose()?.unwrap_or_default();
            let gens = read_generations(&read(&generations)?, mode)?;
            let refs = load_dataset(&references)?;
            let (json, csv) = match mode {
                EvalMode::Cond => {
                    let r = evaluate_cond(&gens, &refs, &molgen::pipeline::metric_config(&cfg))?;
                    let prompts = gens.prompts.clone().unwrap_or_default();
                    (to_json(&r)?, prompt_rows_csv(&r, &prompts)?)
                }
                EvalMode::Uncond => {
                    let r = evaluate_uncond(&gens, &refs)?;
                    (to_json(&r)?, uncond_report_csv(&r)?)
                }
            };
            println!("{json}");
            write_atomic(&out, json.as_bytes())?;
            write_atomic(&with_ext(&out, "csv"), csv.as_bytes())?;
        }
        Command::Ablation {
            data,
            config,
            holdout,
            out_dir,
        } => {
            let cfg = config.as_deref().map(RunConfig::load).transpose()?.unwrap_or_default();
            let d = load_dataset(&data)?;
            let (train, eval) = split_holdout(&d, holdout, cfg.seed)?;
            let rows = run_ablation(&cfg, &train, &eval)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let json = to_json(&rows)?;
            println!("{json}");
            write_atomic(&out_dir.join("ablation.json"), json.as_bytes())?;
            write_atomic(&out_dir.join("ablation.csv"), ablation_csv(&rows)?.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "category": e.category(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
