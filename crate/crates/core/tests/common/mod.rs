#![allow(dead_code)]

pub mod gradcases;
pub mod metricfix;
pub mod oracles;

use molgen::pipeline::{parse_dataset, Dataset, RunConfig, DATASET_HEADER};

pub const TOY_CORPUS: &str = include_str!("../../../../data/toy_corpus.tsv");

/// Small models and a handful of epochs: fast enough for plumbing tests.
pub const TINY_CONFIG: &str = "\
latent_dim = 4
denoiser_layers = 2
denoiser_hidden = 16
T_train = 20
T_sample = 10
gin_layers = 1
gin_hidden = 8
text_embed_dim = 8
decoder_hidden = 16
decoder_node_dim = 8
decoder_rank = 2
epochs_align = 2
epochs_vae = 2
epochs_diffusion = 2
batch_size = 16
";

pub fn tiny_config() -> RunConfig {
    RunConfig::parse_str(TINY_CONFIG).unwrap()
}

/// The first `n` corpus rows as TSV text.
pub fn corpus_head(n: usize) -> String {
    let mut out = String::from(DATASET_HEADER);
    out.push('\n');
    for line in TOY_CORPUS.lines().skip(1).take(n) {
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn small_dataset() -> Dataset {
    parse_dataset(&corpus_head(40)).unwrap()
}
