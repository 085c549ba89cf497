mod common;

use chem::{check_valence, kekulize, parse_smiles, valence_repair, Atom, BondType, Element, MolGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn aromatic_cap(e: Element) -> u32 {
    match e {
        Element::C => 4,
        Element::N | Element::P => 3,
        Element::O | Element::S => 2,
        _ => 0,
    }
}

/// Tries every single/double assignment of the aromatic bonds.
/// An aromatic carbon needs exactly one double bond, an aromatic heteroatom
/// at most one; aromatic atoms stay within their ring valence and every atom
/// within its maximum valence.
fn exhaustive_kekule(g: &MolGraph) -> bool {
    let n = g.num_atoms();
    let arom: Vec<(usize, usize)> = g
        .bond_list()
        .into_iter()
        .filter(|b| b.2 == BondType::Aromatic)
        .map(|(i, j, _)| (i, j))
        .collect();
    assert!(arom.len() <= 16, "oracle is exponential");
    'assign: for mask in 0u32..(1 << arom.len()) {
        let mut order = vec![0u32; n];
        let mut doubles = vec![0u32; n];
        for (i, j, b) in g.bond_list() {
            let o = match b {
                BondType::Aromatic => {
                    let k = arom.iter().position(|&p| p == (i, j)).unwrap();
                    1 + (mask >> k & 1)
                }
                other => other.sigma_order(),
            };
            for a in [i, j] {
                order[a] += o;
                doubles[a] += u32::from(o == 2);
                if b == BondType::Triple && g.atom(a).aromatic {
                    continue 'assign;
                }
            }
        }
        for a in 0..n {
            let at = g.atom(a);
            if order[a] > at.element.max_valence() {
                continue 'assign;
            }
            if at.aromatic {
                let ok = order[a] <= aromatic_cap(at.element)
                    && if at.element == Element::C { doubles[a] == 1 } else { doubles[a] <= 1 };
                if !ok {
                    continue 'assign;
                }
            }
        }
        return true;
    }
    false
}

fn random_aromatic_ring(rng: &mut impl Rng) -> MolGraph {
    let size = rng.random_range(3..=12);
    let pool = [Element::C, Element::C, Element::C, Element::N, Element::O, Element::S, Element::P];
    let mut atoms: Vec<Atom> = (0..size).map(|_| Atom::aromatic(pool[rng.random_range(0..pool.len())])).collect();
    let subs = rng.random_range(0..3);
    for _ in 0..subs {
        atoms.push(Atom::new(if rng.random_bool(0.5) { Element::C } else { Element::O }));
    }
    let mut bonds: Vec<(usize, usize, BondType)> = (0..size).map(|i| (i, (i + 1) % size, BondType::Aromatic)).collect();
    for k in 0..subs {
        let b = if rng.random_bool(0.3) { BondType::Double } else { BondType::Single };
        bonds.push((rng.random_range(0..size), size + k, b));
    }
    MolGraph::from_bonds(atoms, &bonds).unwrap()
}

#[test]
fn kekule_check_matches_exhaustive_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut counts = [0usize; 2];
    for _ in 0..3000 {
        let g = random_aromatic_ring(&mut rng);
        let expected = exhaustive_kekule(&g);
        assert_eq!(check_valence(&g), expected, "{g:?}");
        counts[usize::from(expected)] += 1;
    }
    // both outcomes must be well represented for the comparison to mean anything
    assert!(counts[0] > 300 && counts[1] > 300, "{counts:?}");
}

#[test]
fn kekule_check_matches_oracle_on_corpus_rings() {
    for (s, g) in common::corpus() {
        if g.bond_list().iter().filter(|b| b.2 == BondType::Aromatic).count() <= 16 {
            assert_eq!(check_valence(&g), exhaustive_kekule(&g), "{s}");
        }
        assert!(check_valence(&g), "{s}");
    }
}

#[test]
fn benzene_and_cyclopentadienyl() {
    assert!(check_valence(&parse_smiles("c1ccccc1").unwrap()));
    assert!(!check_valence(&parse_smiles("c1cccc1").unwrap()));
}

#[test]
fn kekulized_forms_are_valid_and_unflagged() {
    for (s, g) in common::corpus() {
        let k = kekulize(&g).unwrap();
        assert!(check_valence(&k), "{s}");
        assert!(k.atoms().iter().all(|a| !a.aromatic));
        assert_eq!(k.num_bonds(), g.num_bonds());
    }
}

fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> MolGraph {
    let atoms: Vec<Atom> = (0..n)
        .map(|_| {
            let e = Element::ALL[rng.random_range(0..Element::ALL.len())];
            if e.can_be_aromatic() && rng.random_bool(0.3) {
                Atom::aromatic(e)
            } else {
                Atom::new(e)
            }
        })
        .collect();
    let mut g = MolGraph::with_atoms(atoms).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let both = g.atom(i).aromatic && g.atom(j).aromatic;
                let b = match rng.random_range(0..4) {
                    0 => BondType::Single,
                    1 => BondType::Double,
                    2 => BondType::Triple,
                    _ if both => BondType::Aromatic,
                    _ => BondType::Single,
                };
                g.set_bond(i, j, b).unwrap();
            }
        }
    }
    g
}

fn assert_only_lowered(before: &MolGraph, after: &MolGraph) {
    assert_eq!(before.num_atoms(), after.num_atoms());
    for i in 0..before.num_atoms() {
        assert_eq!(before.atom(i).element, after.atom(i).element);
        for j in 0..before.num_atoms() {
            let (b, a) = (before.bond(i, j), after.bond(i, j));
            assert!(a.sigma_order() <= b.sigma_order(), "bond ({i},{j}) raised {b:?} -> {a:?}");
            if !b.is_bond() {
                assert!(!a.is_bond());
            }
        }
    }
}

#[test]
fn repair_fixes_200_random_invalid_10_atom_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut fixed = 0;
    while fixed < 200 {
        let g = random_graph(&mut rng, 10, 0.4);
        if check_valence(&g) {
            continue;
        }
        let r = valence_repair(&g);
        assert!(check_valence(&r), "{g:?}");
        assert_only_lowered(&g, &r);
        fixed += 1;
    }
}

/// Valid corpus molecules with random bonds raised or added.
fn corrupt(g: &MolGraph, rng: &mut impl Rng) -> MolGraph {
    let mut h = g.clone();
    let n = h.num_atoms();
    if n < 2 {
        return h;
    }
    for _ in 0..rng.random_range(1..=4) {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let b = [BondType::Double, BondType::Triple, BondType::Single][rng.random_range(0..3)];
        h.set_bond(i, j, b).unwrap();
    }
    h
}

#[test]
fn repair_fixes_1000_corrupted_corpus_graphs() {
    let corpus = common::corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut invalid = 0;
    for k in 0..1000 {
        let g = corrupt(&corpus[k % corpus.len()].1, &mut rng);
        invalid += usize::from(!check_valence(&g));
        let r = valence_repair(&g);
        assert!(check_valence(&r), "{g:?}");
        assert_only_lowered(&g, &r);
    }
    assert!(invalid > 300, "corruption too mild: {invalid}");
}

#[test]
fn repair_is_deterministic_and_fixes_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let g = random_graph(&mut rng, 12, 0.3);
        let r = valence_repair(&g);
        assert_eq!(r, valence_repair(&g));
        assert_eq!(valence_repair(&r), r);
    }
}
