mod common;

use chem::{
    check_valence, descriptors, from_feature_tensors, parse_smiles, to_feature_tensors, BondType, MolGraph,
    EDGE_CLASSES, NODE_CLASSES,
};
use common::{corpus, isomorphic, shuffled};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn tensors_round_trip_for_corpus_molecules() {
    for (s, g) in corpus().iter().take(100) {
        let f = to_feature_tensors(g);
        for i in 0..f.n {
            assert_eq!(f.node_row(i).iter().sum::<f64>(), 1.0);
            assert_eq!(f.edge_fiber(i, i)[0], 1.0);
            for j in 0..f.n {
                assert_eq!(f.edge_fiber(i, j), f.edge_fiber(j, i));
                assert_eq!(f.edge_fiber(i, j).iter().sum::<f64>(), 1.0);
            }
        }
        let back = from_feature_tensors(&f.x, &f.a, &vec![true; f.n]).unwrap();
        assert_eq!(&back, g, "{s}");
        assert!(isomorphic(&back, g));
    }
}

#[test]
fn random_logits_always_give_structurally_valid_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let n = 8;
        let x: Vec<f64> = (0..n * NODE_CLASSES).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a: Vec<f64> = (0..n * n * EDGE_CLASSES).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.8)).collect();
        match from_feature_tensors(&x, &a, &mask) {
            Ok(g) => {
                g.validate().unwrap();
                assert_eq!(g.num_atoms(), mask.iter().filter(|&&m| m).count());
            }
            Err(e) => assert!(mask.iter().all(|&m| !m), "{e}"),
        }
    }
}

/// Cycle rank from a BFS spanning forest: edges not in the forest.
fn non_tree_edges(g: &MolGraph) -> usize {
    let n = g.num_atoms();
    let mut seen = vec![false; n];
    let mut tree = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for (v, _) in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    tree += 1;
                    queue.push_back(v);
                }
            }
        }
    }
    g.num_bonds() - tree
}

#[test]
fn ring_count_matches_spanning_tree_oracle() {
    for (s, g) in corpus() {
        assert_eq!(descriptors(&g).get("rings").unwrap() as usize, non_tree_edges(&g), "{s}");
    }
    let naphthalene = parse_smiles("c1ccc2ccccc2c1").unwrap();
    assert_eq!(descriptors(&naphthalene).get("rings"), Some(2.0));
    let split = parse_smiles("C1CC1.C1CC1").unwrap();
    assert_eq!(descriptors(&split).get("rings"), Some(2.0));
}

#[test]
fn descriptors_are_relabeling_invariant_and_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (s, g) in corpus() {
        let d = descriptors(&g);
        assert_eq!(descriptors(&shuffled(&g, &mut rng)), d, "{s}");
        let v = d.as_slice();
        assert_eq!(v[4..13].iter().sum::<f64>(), v[0], "{s}");
        assert_eq!(v[13..17].iter().sum::<f64>(), v[1], "{s}");
        let arom_bonds = g.bond_list().iter().filter(|b| b.2 == BondType::Aromatic).count();
        assert_eq!(v[16] as usize, arom_bonds);
        assert!(check_valence(&g));
    }
}

#[test]
fn methane_and_benzene_values() {
    let m = descriptors(&parse_smiles("C").unwrap());
    assert_eq!((m.get("atoms"), m.get("bonds"), m.get("rings")), (Some(1.0), Some(0.0), Some(0.0)));
    assert!((m.get("mol_weight").unwrap() - 12.011).abs() < 1e-12);
    let b = descriptors(&parse_smiles("c1ccccc1").unwrap());
    assert_eq!((b.get("rings"), b.get("aromatic_atoms")), (Some(1.0), Some(6.0)));
}
