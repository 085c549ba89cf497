//! Canonical SMILES.
//!
//! Atoms are ranked by iterated neighborhood refinement starting from
//! `(element, aromatic, degree, bond-order multiset)`. Remaining ties are
//! broken by individualizing each tied atom in turn and refining again; every
//! fully discrete ranking yields one depth-first spelling (lowest rank first,
//! branches in rank order) and the lexicographically smallest spelling wins.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{BondType, MolGraph};

/// Upper bound on explored tie-break leaves per component.
const MAX_LEAVES: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalSmiles {
    pub smiles: String,
    /// Atom indices of the input graph in the order they appear in `smiles`.
    pub atom_order: Vec<usize>,
    /// True when the input had several components and only the largest was written.
    pub truncated: bool,
}

/// Canonical spelling of `g` (its largest component when disconnected).
pub fn write_canonical_smiles(g: &MolGraph) -> CanonicalSmiles {
    let comps = g.components();
    if comps.len() == 1 {
        let (smiles, atom_order) = canonical_connected(g);
        return CanonicalSmiles {
            smiles,
            atom_order,
            truncated: false,
        };
    }
    let mut best: Option<(usize, String, Vec<usize>)> = None;
    for comp in &comps {
        let sub = g.induced(comp).expect("component of a valid graph");
        let (s, order) = canonical_connected(&sub);
        let order: Vec<usize> = order.into_iter().map(|k| comp[k]).collect();
        let better = match &best {
            None => true,
            Some((n, bs, _)) => comp.len() > *n || (comp.len() == *n && s < *bs),
        };
        if better {
            best = Some((comp.len(), s, order));
        }
    }
    let (_, smiles, atom_order) = best.expect("at least one component");
    CanonicalSmiles {
        smiles,
        atom_order,
        truncated: true,
    }
}

/// Shorthand for `write_canonical_smiles(g).smiles`.
pub fn canonical_smiles(g: &MolGraph) -> String {
    write_canonical_smiles(g).smiles
}

fn canonical_connected(g: &MolGraph) -> (String, Vec<usize>) {
    let ranks = refine(g, initial_ranks(g));
    let mut best: Option<(String, Vec<usize>)> = None;
    let mut leaves = 0;
    search(g, ranks, &mut best, &mut leaves);
    best.expect("search visits at least one leaf")
}

fn initial_ranks(g: &MolGraph) -> Vec<usize> {
    let keys: Vec<_> = (0..g.num_atoms())
        .map(|i| {
            let a = g.atom(i);
            let mut bonds: Vec<BondType> = g.neighbors(i).map(|(_, b)| b).collect();
            bonds.sort_unstable();
            (a.element, a.aromatic, bonds.len(), bonds)
        })
        .collect();
    dense_ranks(&keys)
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn num_classes(ranks: &[usize]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

fn refine(g: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = num_classes(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, BondType)>)> = (0..g.num_atoms())
            .map(|i| {
                let mut nb: Vec<(usize, BondType)> =
                    g.neighbors(i).map(|(j, b)| (ranks[j], b)).collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = num_classes(&next);
        if next_classes == classes {
            return next;
        }
        ranks = next;
        classes = next_classes;
    }
}

fn search(
    g: &MolGraph,
    ranks: Vec<usize>,
    best: &mut Option<(String, Vec<usize>)>,
    leaves: &mut usize,
) {
    let n = ranks.len();
    // smallest rank shared by more than one atom
    let mut counts = vec![0usize; n];
    for &r in &ranks {
        counts[r] += 1;
    }
    let Some(tied) = (0..n).find(|&r| counts[r] > 1) else {
        *leaves += 1;
        let (s, order) = spell(g, &ranks);
        if best.as_ref().is_none_or(|(bs, _)| s < *bs) {
            *best = Some((s, order));
        }
        return;
    };
    for a in (0..n).filter(|&i| ranks[i] == tied) {
        if *leaves >= MAX_LEAVES && best.is_some() {
            return;
        }
        let split: Vec<usize> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| 2 * r + usize::from(r == tied && i != a))
            .collect();
        search(g, refine(g, dense_ranks(&split)), best, leaves);
    }
}

fn bond_symbol(g: &MolGraph, i: usize, j: usize) -> &'static str {
    match g.bond(i, j) {
        BondType::Single if g.atom(i).aromatic && g.atom(j).aromatic => "-",
        BondType::Single | BondType::Aromatic | BondType::None => "",
        BondType::Double => "=",
        BondType::Triple => "#",
    }
}

fn atom_symbol(g: &MolGraph, i: usize) -> String {
    let a = g.atom(i);
    if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    }
}

/// Depth-first spelling for a discrete ranking.
fn spell(g: &MolGraph, ranks: &[usize]) -> (String, Vec<usize>) {
    let n = g.num_atoms();
    let start = (0..n).min_by_key(|&i| ranks[i]).expect("non-empty");
    let mut sp = Speller {
        g,
        ranks,
        visited: vec![false; n],
        children: vec![Vec::new(); n],
        closures: Vec::new(),
        edge_done: BTreeSet::new(),
        order: Vec::with_capacity(n),
        pos: vec![0; n],
        ring_label: BTreeMap::new(),
        free_labels: (1..=99).collect(),
        out: String::new(),
    };
    sp.walk(start);
    for (k, &a) in sp.order.iter().enumerate() {
        sp.pos[a] = k;
    }
    sp.emit(start);
    (sp.out, sp.order)
}

struct Speller<'a> {
    g: &'a MolGraph,
    ranks: &'a [usize],
    visited: Vec<bool>,
    children: Vec<Vec<usize>>,
    /// Ring bonds as (atom where the ring opens, atom where it closes).
    closures: Vec<(usize, usize)>,
    edge_done: BTreeSet<(usize, usize)>,
    order: Vec<usize>,
    pos: Vec<usize>,
    ring_label: BTreeMap<(usize, usize), u32>,
    free_labels: BTreeSet<u32>,
    out: String,
}

impl Speller<'_> {
    fn sorted_neighbors(&self, u: usize) -> Vec<usize> {
        let mut nb: Vec<usize> = self.g.neighbors(u).map(|(v, _)| v).collect();
        nb.sort_by_key(|&v| self.ranks[v]);
        nb
    }

    /// Spanning tree and ring-closure bonds.
    fn walk(&mut self, u: usize) {
        self.visited[u] = true;
        self.order.push(u);
        for v in self.sorted_neighbors(u) {
            if !self.edge_done.insert((u.min(v), u.max(v))) {
                continue;
            }
            if self.visited[v] {
                self.closures.push((v, u));
            } else {
                self.children[u].push(v);
                self.walk(v);
            }
        }
    }

    fn emit(&mut self, u: usize) {
        self.out.push_str(&atom_symbol(self.g, u));
        let mut closing: Vec<(usize, usize)> =
            self.closures.iter().copied().filter(|&(_, c)| c == u).collect();
        closing.sort_by_key(|&(o, _)| self.pos[o]);
        for key in closing {
            let label = self.ring_label.remove(&key).expect("ring opened before closing");
            push_label(&mut self.out, label);
            self.free_labels.insert(label);
        }
        let mut opening: Vec<(usize, usize)> =
            self.closures.iter().copied().filter(|&(o, _)| o == u).collect();
        opening.sort_by_key(|&(_, c)| self.pos[c]);
        for key in opening {
            let label = self.free_labels.pop_first().expect("fewer than 99 open rings");
            self.ring_label.insert(key, label);
            self.out.push_str(bond_symbol(self.g, key.0, key.1));
            push_label(&mut self.out, label);
        }
        let kids = self.children[u].clone();
        for (k, &v) in kids.iter().enumerate() {
            let last = k + 1 == kids.len();
            if !last {
                self.out.push('(');
            }
            self.out.push_str(bond_symbol(self.g, u, v));
            self.emit(v);
            if !last {
                self.out.push(')');
            }
        }
    }
}

fn push_label(out: &mut String, label: u32) {
    if label < 10 {
        out.push(char::from_digit(label, 10).expect("digit"));
    } else {
        out.push('%');
        out.push_str(&format!("{label:02}"));
    }
}
