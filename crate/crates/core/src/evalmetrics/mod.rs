//! Conditional metrics (similarity, novelty, diversity, validity) and
//! distribution-level unconditional metrics.

mod distribution;

pub use distribution::{
    frechet_descriptor_score, frechet_distance_sq, gaussian_frechet_sq, histogram, kl_div_score, kl_divergence,
    FRECHET_SCALE, HIST_BINS, HIST_SMOOTHING,
};

use std::collections::HashSet;

use chem::{canonical_smiles, check_valence, descriptors, similarity_f, MolGraph};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// A valid generation qualifies when `f(ref, gen)` exceeds this.
    pub qualified_threshold: f64,
    /// A qualified generation is novel when `f(ref, gen)` is below this.
    pub novelty_threshold: f64,
    pub samples_per_prompt: usize,
    /// Diversity over all qualified molecules at once instead of per prompt.
    pub pooled_diversity: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            qualified_threshold: 0.5,
            novelty_threshold: 0.8,
            samples_per_prompt: 5,
            pooled_diversity: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("qualified threshold", self.qualified_threshold),
            ("novelty threshold", self.novelty_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} {v} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Per-prompt counts behind a [`CondEvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRow {
    pub prompt: usize,
    pub generated: usize,
    pub valid: usize,
    pub qualified: usize,
    pub novel: usize,
    /// Mean pairwise `1 − f` among this prompt's qualified molecules.
    pub diversity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondEvalReport {
    pub similarity: f64,
    pub novelty: Option<f64>,
    pub diversity: Option<f64>,
    pub validity: f64,
    pub total: usize,
    pub valid: usize,
    pub invalid: usize,
    pub qualified: usize,
    pub unqualified: usize,
    pub novel: usize,
    pub prompts: Vec<PromptRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncondEvalReport {
    pub uniqueness: f64,
    pub novelty: f64,
    /// Absent when there are no valid generations.
    pub kl_div_score: Option<f64>,
    /// Absent with fewer than two valid generations.
    pub frechet_score: Option<f64>,
    pub validity: f64,
    pub total: usize,
    pub valid: usize,
    pub unique: usize,
}

/// A generation counts as valid when it decoded to a non-empty graph that
/// passes the valence check.
pub fn is_valid(g: &Option<MolGraph>) -> bool {
    g.as_ref().is_some_and(|g| g.num_atoms() > 0 && check_valence(g))
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn mean_pairwise_distance(mols: &[&MolGraph]) -> Option<f64> {
    if mols.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..mols.len() {
        for j in i + 1..mols.len() {
            sum += 1.0 - similarity_f(mols[i], mols[j]);
            pairs += 1;
        }
    }
    Some(sum / pairs as f64)
}

/// Scores `generations[p]` against `references[p]` for every prompt `p`.
pub fn conditional_metrics(
    generations: &[Vec<Option<MolGraph>>],
    references: &[MolGraph],
    cfg: &MetricConfig,
) -> Result<CondEvalReport> {
    cfg.validate()?;
    if generations.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} generation lists for {} references",
            generations.len(),
            references.len()
        )));
    }
    let mut rows = Vec::with_capacity(references.len());
    let mut all_qualified: Vec<&MolGraph> = Vec::new();
    let (mut total, mut valid, mut qualified, mut novel) = (0, 0, 0, 0);
    for (p, (gens, reference)) in generations.iter().zip(references).enumerate() {
        let mut row_q: Vec<&MolGraph> = Vec::new();
        let mut row = PromptRow {
            prompt: p,
            generated: gens.len(),
            valid: 0,
            qualified: 0,
            novel: 0,
            diversity: None,
        };
        for g in gens {
            if !is_valid(g) {
                continue;
            }
            let g = g.as_ref().expect("valid implies present");
            row.valid += 1;
            let f = similarity_f(reference, g);
            if f > cfg.qualified_threshold {
                row.qualified += 1;
                row_q.push(g);
                if f < cfg.novelty_threshold {
                    row.novel += 1;
                }
            }
        }
        row.diversity = mean_pairwise_distance(&row_q);
        total += row.generated;
        valid += row.valid;
        qualified += row.qualified;
        novel += row.novel;
        all_qualified.extend(row_q);
        rows.push(row);
    }
    let diversity = if cfg.pooled_diversity {
        mean_pairwise_distance(&all_qualified)
    } else {
        let per: Vec<f64> = rows.iter().filter_map(|r| r.diversity).collect();
        (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
    };
    Ok(CondEvalReport {
        similarity: percent(qualified, total),
        novelty: (qualified > 0).then(|| percent(novel, qualified)),
        diversity: diversity.map(|d| 100.0 * d),
        validity: percent(valid, total),
        total,
        valid,
        invalid: total - valid,
        qualified,
        unqualified: valid - qualified,
        novel,
        prompts: rows,
    })
}

fn valid_smiles(generations: &[Option<MolGraph>]) -> Vec<String> {
    generations
        .iter()
        .filter(|g| is_valid(g))
        .map(|g| canonical_smiles(g.as_ref().expect("valid implies present")))
        .collect()
}

/// Distinct canonical SMILES over valid generations, as a percentage.
pub fn uniqueness(generations: &[Option<MolGraph>]) -> f64 {
    let smiles = valid_smiles(generations);
    let unique: HashSet<&String> = smiles.iter().collect();
    percent(unique.len(), smiles.len())
}

/// Valid generations whose canonical SMILES is not in `training`, as a percentage.
pub fn uncond_novelty(generations: &[Option<MolGraph>], training: &HashSet<String>) -> f64 {
    let smiles = valid_smiles(generations);
    let novel = smiles.iter().filter(|s| !training.contains(*s)).count();
    percent(novel, smiles.len())
}

pub fn unconditional_metrics(generations: &[Option<MolGraph>], training: &[MolGraph]) -> Result<UncondEvalReport> {
    if generations.is_empty() || training.is_empty() {
        return Err(Error::invalid("unconditional metrics need generations and training molecules"));
    }
    let train_set: HashSet<String> = training.iter().map(canonical_smiles).collect();
    let smiles = valid_smiles(generations);
    let unique = smiles.iter().collect::<HashSet<_>>().len();
    let gen_desc: Vec<_> = generations
        .iter()
        .filter(|g| is_valid(g))
        .map(|g| descriptors(g.as_ref().expect("valid implies present")))
        .collect();
    let train_desc: Vec<_> = training.iter().map(descriptors).collect();
    let kl = (!gen_desc.is_empty()).then(|| kl_div_score(&gen_desc, &train_desc)).transpose()?;
    let frechet = if gen_desc.len() >= 2 && train_desc.len() >= 2 {
        Some(frechet_descriptor_score(&gen_desc, &train_desc)?)
    } else {
        None
    };
    Ok(UncondEvalReport {
        uniqueness: percent(unique, smiles.len()),
        novelty: uncond_novelty(generations, &train_set),
        kl_div_score: kl,
        frechet_score: frechet,
        validity: percent(smiles.len(), generations.len()),
        total: generations.len(),
        valid: smiles.len(),
        unique,
    })
}
