use chem::{descriptors, parse_smiles, write_canonical_smiles, MolGraph};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::dataset::DATASET_HEADER;
use crate::{Error, Result};

pub const RING_CAPTION: &str = "The molecule contains a ring.";
pub const NO_RING_CAPTION: &str = "The molecule contains no ring.";
/// Share of captions that carry only the ring sentence.
const BASE_ONLY: f64 = 0.3;

pub fn has_ring(g: &MolGraph) -> bool {
    descriptors(g).get("rings").unwrap_or(0.0) > 0.0
}

/// The property a ring/no-ring prompt states, if it states one.
pub fn stated_ring_property(prompt: &str) -> Option<bool> {
    let p = prompt.to_lowercase();
    if p.contains("contains no ring") {
        Some(false)
    } else if p.contains("contains a ring") {
        Some(true)
    } else {
        None
    }
}

fn count_word(n: usize) -> &'static str {
    match n {
        1 => "one",
        2 => "two",
        3 => "three",
        4 => "four",
        _ => "several",
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{} {word}", count_word(n))
    } else {
        format!("{} {word}s", count_word(n))
    }
}

/// Facts about `g` usable as extra caption sentences.
pub fn caption_clauses(g: &MolGraph) -> Vec<String> {
    let d = descriptors(g);
    let get = |k: &str| d.get(k).unwrap_or(0.0) as usize;
    let mut out = Vec::new();
    if get("n_O") > 0 {
        out.push(format!("It has {}.", plural(get("n_O"), "oxygen")));
    }
    if get("n_N") > 0 {
        out.push(format!("It has {}.", plural(get("n_N"), "nitrogen")));
    }
    if get("n_S") > 0 {
        out.push("It contains sulfur.".to_string());
    }
    if get("n_F") + get("n_Cl") + get("n_Br") + get("n_I") > 0 {
        out.push("It contains a halogen.".to_string());
    }
    if get("aromatic_atoms") > 0 {
        out.push("It is aromatic.".to_string());
    }
    if get("double_bonds") > 0 {
        out.push("It has a double bond.".to_string());
    }
    if get("triple_bonds") > 0 {
        out.push("It has a triple bond.".to_string());
    }
    out.push(format!("It has {}.", plural(get("n_C"), "carbon")));
    out
}

/// The ring sentence, followed by up to two shuffled facts.
pub fn caption(g: &MolGraph, rng: &mut impl Rng) -> String {
    let base = if has_ring(g) { RING_CAPTION } else { NO_RING_CAPTION };
    if rng.random::<f64>() < BASE_ONLY {
        return base.to_string();
    }
    let mut clauses = caption_clauses(g);
    clauses.shuffle(rng);
    let k = *[1usize, 2].choose(rng).expect("non-empty");
    let mut s = base.to_string();
    for c in clauses.iter().take(k) {
        s.push(' ');
        s.push_str(c);
    }
    s
}

/// A captioned TSV corpus for one SMILES per line (blank lines and `#`
/// comments skipped). Every SMILES must parse.
pub fn make_corpus(smiles_list: &str, rng: &mut impl Rng) -> Result<String> {
    let mut out = String::from(DATASET_HEADER);
    out.push('\n');
    for (i, line) in smiles_list.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let g = parse_smiles(s).map_err(|e| Error::Dataset(format!("line {}: `{s}`: {e}", i + 1)))?;
        out.push_str(&write_canonical_smiles(&g).smiles);
        out.push('\t');
        out.push_str(&caption(&g, rng));
        out.push('\n');
    }
    Ok(out)
}
