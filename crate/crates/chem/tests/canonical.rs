mod common;

use chem::{canonical_smiles, parse_smiles, write_canonical_smiles};
use common::{corpus, isomorphic, shuffled};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ethanol_spellings_share_one_form() {
    let forms: Vec<String> = ["CCO", "OCC", "C(O)C"]
        .iter()
        .map(|s| canonical_smiles(&parse_smiles(s).unwrap()))
        .collect();
    assert_eq!(forms[0], forms[1]);
    assert_eq!(forms[1], forms[2]);
}

#[test]
fn fifty_relabelings_of_corpus_molecules() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    for (s, g) in corpus().iter().take(100) {
        let base = canonical_smiles(g);
        for _ in 0..50 {
            let c = canonical_smiles(&shuffled(g, &mut rng));
            if c != base {
                failures.push(format!("{s}: {base} vs {c}"));
                break;
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn twelve_atom_molecule_has_one_string() {
    let g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
    assert!(g.num_atoms() >= 12);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut forms: Vec<String> = (0..50).map(|_| canonical_smiles(&shuffled(&g, &mut rng))).collect();
    forms.dedup();
    assert_eq!(forms.len(), 1, "{forms:?}");
}

#[test]
fn symmetric_cages_are_stable() {
    // highly symmetric graphs exercise the tie-break search
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in ["C12C3C4C1C5C2C3C45", "C1CC2CCC1CC2", "c1ccc2ccccc2c1", "C1CCC2CCCCC2C1", "CC(C)(C)C(C)(C)C"] {
        let g = parse_smiles(s).unwrap();
        let base = canonical_smiles(&g);
        for _ in 0..50 {
            assert_eq!(canonical_smiles(&shuffled(&g, &mut rng)), base, "{s}");
        }
    }
}

#[test]
fn round_trip_is_isomorphic_on_full_corpus() {
    for (s, g) in corpus() {
        let c = write_canonical_smiles(&g);
        assert!(!c.truncated, "{s}");
        let back = parse_smiles(&c.smiles).unwrap();
        assert!(isomorphic(&g, &back), "{s} -> {}", c.smiles);
    }
}

#[test]
fn write_parse_write_is_idempotent() {
    for (s, g) in corpus() {
        let once = canonical_smiles(&g);
        let twice = canonical_smiles(&parse_smiles(&once).unwrap());
        assert_eq!(once, twice, "{s}");
    }
}

#[test]
fn distinct_molecules_get_distinct_strings() {
    let all = corpus();
    for (i, (sa, a)) in all.iter().enumerate() {
        for (sb, b) in &all[i + 1..] {
            let same = canonical_smiles(a) == canonical_smiles(b);
            assert_eq!(same, isomorphic(a, b), "{sa} / {sb}");
        }
    }
}
