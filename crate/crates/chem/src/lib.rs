//! Heavy-atom molecular graphs and the cheminformatics needed to train and
//! score graph generators: a SMILES subset, canonical writing, one-hot
//! feature tensors, valence checks with repair, path fingerprints and
//! descriptor vectors.

mod descriptors;
mod features;
mod fingerprint;
pub mod graph;
pub mod smiles;
mod valence;

pub use descriptors::{descriptors, DescriptorVec, DESCRIPTOR_NAMES, NUM_DESCRIPTORS};
pub use features::{
    atom_from_class, from_feature_tensors, node_class, to_feature_tensors, GraphFeatures,
    NODE_CLASSES,
};
pub use fingerprint::{
    fnv1a64, path_fingerprint, path_label, similarity_f, Fingerprint, FP_BITS, MAX_PATH_BONDS,
};
pub use graph::{Atom, BondType, Element, MolGraph, MAX_ATOMS};
pub use smiles::{
    canonical_smiles, parse_smiles, parse_smiles_detailed, write_canonical_smiles,
    CanonicalSmiles, ParsedSmiles, SmilesError,
};
pub use valence::{check_valence, kekulize, valence_repair};

/// Number of edge classes including the explicit no-edge class.
pub const EDGE_CLASSES: usize = 5;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ChemError {
    #[error("empty molecule")]
    Empty,
    #[error("molecule has {0} heavy atoms, more than {MAX_ATOMS}")]
    TooManyAtoms(usize),
    #[error("invalid molecule: {0}")]
    Invalid(String),
}
