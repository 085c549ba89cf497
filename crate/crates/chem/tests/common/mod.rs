#![allow(dead_code)]

use chem::{parse_smiles, BondType, MolGraph};
use petgraph::graph::UnGraph;
use rand::seq::SliceRandom;
use rand::Rng;

pub const TOY_SMILES: &str = include_str!("../../../../data/toy_smiles.txt");

pub fn corpus() -> Vec<(String, MolGraph)> {
    TOY_SMILES
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|s| (s.to_string(), parse_smiles(s).unwrap_or_else(|e| panic!("{s}: {e}"))))
        .collect()
}

pub fn shuffled(g: &MolGraph, rng: &mut impl Rng) -> MolGraph {
    let mut order: Vec<usize> = (0..g.num_atoms()).collect();
    order.shuffle(rng);
    g.permuted(&order).unwrap()
}

pub fn to_petgraph(g: &MolGraph) -> UnGraph<(usize, bool), BondType> {
    let mut pg = UnGraph::new_undirected();
    let nodes: Vec<_> = g
        .atoms()
        .iter()
        .map(|a| pg.add_node((a.element.index(), a.aromatic)))
        .collect();
    for (i, j, b) in g.bond_list() {
        pg.add_edge(nodes[i], nodes[j], b);
    }
    pg
}

pub fn isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    petgraph::algo::is_isomorphic_matching(&to_petgraph(a), &to_petgraph(b), |x, y| x == y, |x, y| x == y)
}
