mod parser;
mod writer;

pub use parser::{parse_smiles, parse_smiles_detailed, ParsedSmiles, SmilesError};
pub use writer::{canonical_smiles, write_canonical_smiles, CanonicalSmiles};
