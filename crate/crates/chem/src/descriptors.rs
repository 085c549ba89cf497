use serde::{Deserialize, Serialize};

use crate::graph::{BondType, Element, MolGraph};

pub const NUM_DESCRIPTORS: usize = 18;

/// Frozen descriptor order.
pub const DESCRIPTOR_NAMES: [&str; NUM_DESCRIPTORS] = [
    "atoms",
    "bonds",
    "rings",
    "aromatic_atoms",
    "n_C",
    "n_N",
    "n_O",
    "n_F",
    "n_P",
    "n_S",
    "n_Cl",
    "n_Br",
    "n_I",
    "single_bonds",
    "double_bonds",
    "triple_bonds",
    "aromatic_bonds",
    "mol_weight",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorVec(pub [f64; NUM_DESCRIPTORS]);

impl DescriptorVec {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        DESCRIPTOR_NAMES.iter().position(|&n| n == name).map(|k| self.0[k])
    }
}

/// Descriptor vector of `g`; rings are the cycle rank, weight counts heavy atoms only.
pub fn descriptors(g: &MolGraph) -> DescriptorVec {
    let mut d = [0.0; NUM_DESCRIPTORS];
    let n = g.num_atoms();
    let bonds = g.bond_list();
    d[0] = n as f64;
    d[1] = bonds.len() as f64;
    d[2] = (bonds.len() + g.components().len()) as f64 - n as f64;
    for a in g.atoms() {
        if a.aromatic {
            d[3] += 1.0;
        }
        d[4 + a.element.index()] += 1.0;
    }
    // fixed summation order keeps the weight bitwise relabeling-invariant
    d[17] = Element::ALL.iter().map(|e| d[4 + e.index()] * e.mass()).sum();
    let bond_base = 4 + Element::ALL.len();
    for (_, _, b) in bonds {
        d[bond_base + b.index() - BondType::Single.index()] += 1.0;
    }
    DescriptorVec(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    #[test]
    fn methane() {
        let d = descriptors(&parse_smiles("C").unwrap());
        assert_eq!(d.get("atoms"), Some(1.0));
        assert_eq!(d.get("bonds"), Some(0.0));
        assert_eq!(d.get("rings"), Some(0.0));
        assert!((d.get("mol_weight").unwrap() - 12.011).abs() < 1e-9);
    }

    #[test]
    fn benzene() {
        let d = descriptors(&parse_smiles("c1ccccc1").unwrap());
        assert_eq!(d.get("rings"), Some(1.0));
        assert_eq!(d.get("aromatic_atoms"), Some(6.0));
        assert_eq!(d.get("aromatic_bonds"), Some(6.0));
        assert_eq!(d.get("n_C"), Some(6.0));
    }

    #[test]
    fn names_match_layout() {
        let d = descriptors(&parse_smiles("ClC#N").unwrap());
        assert_eq!(d.get("n_Cl"), Some(1.0));
        assert_eq!(d.get("triple_bonds"), Some(1.0));
        assert_eq!(d.get("single_bonds"), Some(1.0));
        assert!(d.as_slice().iter().all(|&v| v >= 0.0));
    }
}
