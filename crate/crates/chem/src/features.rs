//! One-hot node and edge tensors.
//!
//! Node classes are the nine elements in [`Element::ALL`] order followed by
//! the five aromatic variants in [`Element::AROMATIC`] order. Edge classes
//! follow [`BondType::index`], with class 0 meaning "no edge".

use crate::graph::{Atom, BondType, Element, MolGraph, MAX_ATOMS};
use crate::{ChemError, EDGE_CLASSES};

pub const NODE_CLASSES: usize = Element::ALL.len() + Element::AROMATIC.len();

pub fn node_class(a: Atom) -> usize {
    if a.aromatic {
        let k = Element::AROMATIC
            .iter()
            .position(|&e| e == a.element)
            .expect("aromatic flag only on aromatic-capable elements");
        Element::ALL.len() + k
    } else {
        a.element.index()
    }
}

pub fn atom_from_class(c: usize) -> Option<Atom> {
    if c < Element::ALL.len() {
        Some(Atom::new(Element::ALL[c]))
    } else {
        Element::AROMATIC
            .get(c - Element::ALL.len())
            .map(|&e| Atom::aromatic(e))
    }
}

/// Dense row-major tensors: `x` is `n × NODE_CLASSES`, `a` is
/// `n × n × EDGE_CLASSES`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFeatures {
    pub n: usize,
    pub x: Vec<f64>,
    pub a: Vec<f64>,
}

impl GraphFeatures {
    pub fn node_row(&self, i: usize) -> &[f64] {
        &self.x[i * NODE_CLASSES..(i + 1) * NODE_CLASSES]
    }

    pub fn edge_fiber(&self, i: usize, j: usize) -> &[f64] {
        let k = (i * self.n + j) * EDGE_CLASSES;
        &self.a[k..k + EDGE_CLASSES]
    }
}

pub fn to_feature_tensors(g: &MolGraph) -> GraphFeatures {
    let n = g.num_atoms();
    let mut x = vec![0.0; n * NODE_CLASSES];
    let mut a = vec![0.0; n * n * EDGE_CLASSES];
    for i in 0..n {
        x[i * NODE_CLASSES + node_class(g.atom(i))] = 1.0;
        for j in 0..n {
            a[(i * n + j) * EDGE_CLASSES + g.bond(i, j).index()] = 1.0;
        }
    }
    GraphFeatures { n, x, a }
}

fn argmax(v: &[f64]) -> usize {
    // later index wins ties
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x >= v[best] {
            best = k;
        }
    }
    best
}

/// Realizes a graph from (possibly soft) node scores `x` (`n × NODE_CLASSES`)
/// and edge scores `a` (`n × n × EDGE_CLASSES`), keeping only rows where
/// `node_mask` is set.
///
/// Each edge fiber is the elementwise max of the `(i,j)` and `(j,i)` fibers
/// before taking its argmax. Aromatic edges between atoms that did not come
/// out aromatic become single bonds.
pub fn from_feature_tensors(x: &[f64], a: &[f64], node_mask: &[bool]) -> Result<MolGraph, ChemError> {
    let n = node_mask.len();
    if x.len() != n * NODE_CLASSES || a.len() != n * n * EDGE_CLASSES {
        return Err(ChemError::Invalid(format!(
            "feature sizes {} and {} do not match {n} nodes",
            x.len(),
            a.len()
        )));
    }
    if x.iter().chain(a).any(|v| v.is_nan()) {
        return Err(ChemError::Invalid("NaN in feature tensors".into()));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| node_mask[i]).collect();
    if keep.is_empty() {
        return Err(ChemError::Empty);
    }
    if keep.len() > MAX_ATOMS {
        return Err(ChemError::TooManyAtoms(keep.len()));
    }
    let atoms: Vec<Atom> = keep
        .iter()
        .map(|&i| atom_from_class(argmax(&x[i * NODE_CLASSES..(i + 1) * NODE_CLASSES])).expect("class in range"))
        .collect();
    let mut g = MolGraph::with_atoms(atoms)?;
    for (p, &i) in keep.iter().enumerate() {
        for (q, &j) in keep.iter().enumerate().skip(p + 1) {
            let fi = &a[(i * n + j) * EDGE_CLASSES..(i * n + j + 1) * EDGE_CLASSES];
            let fj = &a[(j * n + i) * EDGE_CLASSES..(j * n + i + 1) * EDGE_CLASSES];
            let sym: Vec<f64> = fi.iter().zip(fj).map(|(u, v)| u.max(*v)).collect();
            let mut b = BondType::from_index(argmax(&sym)).expect("class in range");
            if b == BondType::Aromatic && !(g.atom(p).aromatic && g.atom(q).aromatic) {
                b = BondType::Single;
            }
            g.set_bond(p, q, b)?;
        }
    }
    Ok(g)
}
