//! Valence validity, Kekulé resolution and deterministic repair.

use crate::graph::{BondType, Element, MolGraph};

/// Whether an aromatic atom must, may, or cannot take a π double bond in a
/// Kekulé structure, or cannot be aromatic at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PiRole {
    Required,
    Optional,
    Forbidden,
    Impossible,
}

/// Valence available to an aromatic atom inside the ring system.
fn aromatic_valence(e: Element) -> u32 {
    match e {
        Element::C => 4,
        Element::N | Element::P => 3,
        Element::O | Element::S => 2,
        _ => 0,
    }
}

// An aromatic carbon carries exactly one double bond; an aromatic heteroatom
// at most one, or none when it donates a lone pair.
fn pi_role(g: &MolGraph, i: usize) -> PiRole {
    let a = g.atom(i);
    let used = g.sigma_valence(i);
    let cap = aromatic_valence(a.element);
    if used > cap {
        return PiRole::Impossible;
    }
    let explicit_doubles = g.neighbors(i).filter(|(_, b)| *b == BondType::Double).count();
    let has_triple = g.neighbors(i).any(|(_, b)| b == BondType::Triple);
    if has_triple || explicit_doubles > 1 {
        return PiRole::Impossible;
    }
    match (a.element, explicit_doubles, used < cap) {
        (_, 1, _) => PiRole::Forbidden,
        (Element::C, _, true) => PiRole::Required,
        (Element::C, _, false) => PiRole::Impossible,
        (_, _, true) => PiRole::Optional,
        (_, _, false) => PiRole::Forbidden,
    }
}

/// Finds a set of aromatic bonds forming a matching that covers every
/// atom with [`PiRole::Required`] among `atoms`.
fn kekule_matching(g: &MolGraph, atoms: &[usize]) -> Option<Vec<(usize, usize)>> {
    let n = g.num_atoms();
    let mut role = vec![PiRole::Forbidden; n];
    for &i in atoms {
        role[i] = pi_role(g, i);
        if role[i] == PiRole::Impossible {
            return None;
        }
    }
    let mut mate = vec![usize::MAX; n];
    let mut required: Vec<usize> = atoms.iter().copied().filter(|&i| role[i] == PiRole::Required).collect();
    required.sort_unstable();

    fn solve(g: &MolGraph, required: &[usize], k: usize, role: &[PiRole], mate: &mut [usize]) -> bool {
        let Some(&u) = required[k..].iter().find(|&&u| mate[u] == usize::MAX) else {
            return true;
        };
        let next = k + required[k..].iter().position(|&x| x == u).expect("present") + 1;
        for (v, b) in g.neighbors(u) {
            if b != BondType::Aromatic || mate[v] != usize::MAX || role[v] == PiRole::Forbidden {
                continue;
            }
            mate[u] = v;
            mate[v] = u;
            if solve(g, required, next, role, mate) {
                return true;
            }
            mate[u] = usize::MAX;
            mate[v] = usize::MAX;
        }
        false
    }

    if !solve(g, &required, 0, &role, &mut mate) {
        return None;
    }
    let mut pairs: Vec<(usize, usize)> = atoms
        .iter()
        .filter(|&&i| mate[i] != usize::MAX && i < mate[i])
        .map(|&i| (i, mate[i]))
        .collect();
    pairs.sort_unstable();
    Some(pairs)
}

/// Aromatic systems: aromatic-flagged atoms grouped by aromatic bonds.
fn aromatic_systems(g: &MolGraph) -> Vec<Vec<usize>> {
    let n = g.num_atoms();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] || !g.atom(s).aromatic {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            comp.push(u);
            for (v, b) in g.neighbors(u) {
                if b == BondType::Aromatic && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// True when every aromatic system has a Kekulé structure and each atom's
/// bond-order sum stays within its maximum valence.
pub fn check_valence(g: &MolGraph) -> bool {
    for i in 0..g.num_atoms() {
        if g.sigma_valence(i) > g.atom(i).element.max_valence() {
            return false;
        }
    }
    aromatic_systems(g)
        .iter()
        .all(|sys| kekule_matching(g, sys).is_some())
}

/// Kekulé form of `g`: aromatic bonds become alternating single/double
/// bonds and aromatic flags are cleared. `None` when no assignment exists.
pub fn kekulize(g: &MolGraph) -> Option<MolGraph> {
    let mut out = g.clone();
    for sys in aromatic_systems(g) {
        let pairs = kekule_matching(g, &sys)?;
        for &i in &sys {
            for (j, b) in g.neighbors(i) {
                if b == BondType::Aromatic && i < j {
                    out.set_bond(i, j, BondType::Single).ok()?;
                }
            }
        }
        for &i in &sys {
            out.atom_mut(i).aromatic = false;
        }
        for (i, j) in pairs {
            out.set_bond(i, j, BondType::Double).ok()?;
        }
    }
    Some(out)
}

fn excess(g: &MolGraph, i: usize) -> i64 {
    g.sigma_valence(i) as i64 - g.atom(i).element.max_valence() as i64
}

/// Forces `g` to pass [`check_valence`] without adding atoms or bonds.
///
/// Over-valent atoms are handled largest excess first (ties by index): their
/// highest-order bond is lowered by one step, and when only single or
/// aromatic bonds remain, the bond to the neighbor with the largest excess
/// (ties by index) is deleted. Aromatic systems with no Kekulé structure are
/// then demoted to single bonds on unflagged atoms.
pub fn valence_repair(g: &MolGraph) -> MolGraph {
    let mut out = g.clone();
    let n = out.num_atoms();
    loop {
        let worst = (0..n)
            .map(|i| (excess(&out, i), i))
            .filter(|&(e, _)| e > 0)
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let Some((_, atom)) = worst else { break };
        let nbrs: Vec<(usize, BondType)> = out.neighbors(atom).collect();
        let downgrade = nbrs
            .iter()
            .filter(|(_, b)| matches!(b, BondType::Double | BondType::Triple))
            .max_by(|(ja, ba), (jb, bb)| {
                ba.sigma_order()
                    .cmp(&bb.sigma_order())
                    .then(excess(&out, *ja).cmp(&excess(&out, *jb)))
                    .then(jb.cmp(ja))
            })
            .copied();
        match downgrade {
            Some((j, BondType::Triple)) => out.set_bond(atom, j, BondType::Double),
            Some((j, _)) => out.set_bond(atom, j, BondType::Single),
            None => {
                let (j, _) = *nbrs
                    .iter()
                    .max_by(|(ja, _), (jb, _)| excess(&out, *ja).cmp(&excess(&out, *jb)).then(jb.cmp(ja)))
                    .expect("an over-valent atom has bonds");
                out.set_bond(atom, j, BondType::None)
            }
        }
        .expect("lowering a bond keeps the graph valid");
    }
    for sys in aromatic_systems(&out) {
        if kekule_matching(&out, &sys).is_some() {
            continue;
        }
        for &i in &sys {
            let aromatic_nbrs: Vec<usize> = out
                .neighbors(i)
                .filter(|(_, b)| *b == BondType::Aromatic)
                .map(|(j, _)| j)
                .collect();
            for j in aromatic_nbrs {
                out.set_bond(i, j, BondType::Single).expect("single bond is always allowed");
            }
        }
        for &i in &sys {
            out.atom_mut(i).aromatic = false;
        }
    }
    out
}
