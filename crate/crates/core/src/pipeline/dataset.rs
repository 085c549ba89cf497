use std::collections::BTreeMap;
use std::path::Path;

use chem::{check_valence, parse_smiles, write_canonical_smiles, MolGraph, SmilesError};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DATASET_HEADER: &str = "smiles\tdescription";

/// One kept molecule, atoms in canonical SMILES order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub smiles: String,
    pub graph: MolGraph,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub total: usize,
    pub kept: usize,
    pub dropped: BTreeMap<String, usize>,
}

impl IngestReport {
    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub pairs: Vec<Pair>,
    pub report: IngestReport,
}

impl Dataset {
    pub fn graphs(&self) -> Vec<MolGraph> {
        self.pairs.iter().map(|p| p.graph.clone()).collect()
    }

    pub fn descriptions(&self) -> Vec<&str> {
        self.pairs.iter().map(|p| p.description.as_str()).collect()
    }
}

/// Why a row was rejected, or the accepted pair.
pub fn ingest_row(line: &str) -> std::result::Result<Pair, &'static str> {
    let Some((smiles, description)) = line.split_once('\t') else {
        return Err("format");
    };
    let description = description.trim();
    if description.is_empty() || description.contains('\t') {
        return Err("format");
    }
    let g = match parse_smiles(smiles.trim()) {
        Ok(g) => g,
        Err(SmilesError::AtomCount(_)) => return Err("atom_count"),
        Err(SmilesError::UnknownAtom { .. }) => return Err("element"),
        Err(_) => return Err("parse"),
    };
    if !check_valence(&g) {
        return Err("valence");
    }
    if !g.is_connected() {
        return Err("disconnected");
    }
    let canon = write_canonical_smiles(&g);
    let graph = g.permuted(&canon.atom_order).map_err(|_| "parse")?;
    Ok(Pair {
        smiles: canon.smiles,
        graph,
        description: description.to_string(),
    })
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    match lines.next() {
        None => return Err(Error::Dataset("empty file".into())),
        Some(h) if h.trim_end_matches('\r') == DATASET_HEADER => {}
        Some(h) => {
            return Err(Error::Dataset(format!(
                "missing header: expected `smiles<TAB>description`, found `{}`",
                h.escape_debug()
            )))
        }
    }
    let mut pairs = Vec::new();
    let mut report = IngestReport::default();
    for line in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        report.total += 1;
        match ingest_row(line) {
            Ok(p) => pairs.push(p),
            Err(reason) => *report.dropped.entry(reason.to_string()).or_default() += 1,
        }
    }
    report.kept = pairs.len();
    if report.total == 0 {
        return Err(Error::Dataset("no data rows".into()));
    }
    Ok(Dataset { pairs, report })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}
