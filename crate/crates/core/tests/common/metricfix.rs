use chem::{check_valence, parse_smiles, similarity_f, BondType, MolGraph};
use molgen::evalmetrics::CondEvalReport;

pub fn mol(s: &str) -> MolGraph {
    parse_smiles(s).unwrap()
}

/// Parses but breaks valence (a three-bonded oxygen).
pub fn invalid_mol() -> MolGraph {
    let mut g = mol("CC=O");
    g.set_bond(1, 2, BondType::Triple).unwrap();
    assert!(!check_valence(&g));
    g
}

pub struct Fixture {
    pub references: Vec<MolGraph>,
    pub generations: Vec<Vec<Option<MolGraph>>>,
}

pub fn fixture() -> Fixture {
    Fixture {
        references: vec![mol("CCCCCCO"), mol("c1ccccc1CCN")],
        generations: vec![
            vec![Some(mol("OCCCCCC")), Some(mol("CCCCCCCO")), Some(invalid_mol())],
            vec![Some(mol("c1ccccc1CCCN")), Some(mol("c1ccccc1CN")), Some(mol("c1ccccc1"))],
        ],
    }
}

#[derive(Debug, PartialEq)]
pub struct Counts {
    pub total: usize,
    pub valid: usize,
    pub qualified: usize,
    pub novel: usize,
    /// Per-prompt mean pairwise distances, for prompts with two qualified molecules.
    pub diversities: Vec<f64>,
}

/// The conditional metrics counted directly from their definitions.
pub fn brute_force(fx: &Fixture) -> Counts {
    let (mut total, mut valid, mut qualified, mut novel) = (0usize, 0usize, 0usize, 0usize);
    let mut diversities = Vec::new();
    for (gens, r) in fx.generations.iter().zip(&fx.references) {
        let mut q: Vec<&MolGraph> = Vec::new();
        for g in gens {
            total += 1;
            let Some(g) = g else { continue };
            if g.num_atoms() == 0 || !check_valence(g) {
                continue;
            }
            valid += 1;
            let f = similarity_f(r, g);
            if f > 0.5 {
                qualified += 1;
                q.push(g);
                if f < 0.8 {
                    novel += 1;
                }
            }
        }
        if q.len() >= 2 {
            let mut d = Vec::new();
            for i in 0..q.len() {
                for j in 0..q.len() {
                    if i < j {
                        d.push(1.0 - similarity_f(q[i], q[j]));
                    }
                }
            }
            diversities.push(d.iter().sum::<f64>() / d.len() as f64);
        }
    }
    Counts {
        total,
        valid,
        qualified,
        novel,
        diversities,
    }
}

/// Every mismatch between a report and the brute-force counts.
pub fn report_mismatches(report: &CondEvalReport, c: &Counts) -> Vec<String> {
    let pct = |a: usize, b: usize| 100.0 * a as f64 / b as f64;
    let div = (!c.diversities.is_empty())
        .then(|| 100.0 * c.diversities.iter().sum::<f64>() / c.diversities.len() as f64);
    let mut bad = Vec::new();
    let mut expect = |what: &str, ok: bool| {
        if !ok {
            bad.push(what.to_string());
        }
    };
    expect("total", report.total == c.total);
    expect("valid", report.valid == c.valid);
    expect("invalid", report.invalid == c.total - c.valid);
    expect("qualified", report.qualified == c.qualified);
    expect("unqualified", report.unqualified == c.valid - c.qualified);
    expect("novel", report.novel == c.novel);
    expect("similarity", report.similarity == pct(c.qualified, c.total));
    expect("validity", report.validity == pct(c.valid, c.total));
    expect("novelty", report.novelty == (c.qualified > 0).then(|| pct(c.novel, c.qualified)));
    expect("diversity", report.diversity == div);
    bad
}
