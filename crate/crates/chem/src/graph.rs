use serde::{Deserialize, Serialize};

use crate::ChemError;

/// Largest number of heavy atoms a [`MolGraph`] may hold.
pub const MAX_ATOMS: usize = 30;

/// Heavy-atom vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    C,
    N,
    O,
    F,
    P,
    S,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 9] = [
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    /// Elements that may carry the aromatic flag, in feature order.
    pub const AROMATIC: [Element; 5] = [Element::C, Element::N, Element::O, Element::P, Element::S];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.into_iter().find(|e| e.symbol() == s)
    }

    /// Upper bound on the bond-order sum (implicit hydrogens fill the rest).
    pub fn max_valence(self) -> u32 {
        match self {
            Element::C => 4,
            Element::N => 3,
            Element::O => 2,
            Element::F | Element::Cl | Element::Br | Element::I => 1,
            Element::P => 5,
            Element::S => 6,
        }
    }

    /// Standard atomic mass.
    pub fn mass(self) -> f64 {
        match self {
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::P => 30.974,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::Br => 79.904,
            Element::I => 126.904,
        }
    }

    pub fn can_be_aromatic(self) -> bool {
        Element::AROMATIC.contains(&self)
    }
}

/// Bond classes; `None` is the explicit no-edge class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum BondType {
    #[default]
    None,
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondType {
    pub const ALL: [BondType; 5] = [
        BondType::None,
        BondType::Single,
        BondType::Double,
        BondType::Triple,
        BondType::Aromatic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<BondType> {
        BondType::ALL.get(i).copied()
    }

    /// Contribution to the valence sum before Kekulé resolution.
    /// Aromatic bonds count as 1; their π order is assigned by matching.
    pub fn sigma_order(self) -> u32 {
        match self {
            BondType::None => 0,
            BondType::Single | BondType::Aromatic => 1,
            BondType::Double => 2,
            BondType::Triple => 3,
        }
    }

    pub fn is_bond(self) -> bool {
        self != BondType::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Self {
            element,
            aromatic: false,
        }
    }

    pub fn aromatic(element: Element) -> Self {
        Self {
            element,
            aromatic: true,
        }
    }
}

/// Heavy-atom molecular graph with a dense symmetric bond matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<BondType>,
}

impl MolGraph {
    /// Graph with the given atoms and no bonds.
    pub fn with_atoms(atoms: Vec<Atom>) -> Result<Self, ChemError> {
        if atoms.is_empty() {
            return Err(ChemError::Empty);
        }
        if atoms.len() > MAX_ATOMS {
            return Err(ChemError::TooManyAtoms(atoms.len()));
        }
        if let Some(a) = atoms.iter().find(|a| a.aromatic && !a.element.can_be_aromatic()) {
            return Err(ChemError::Invalid(format!(
                "{} cannot be aromatic",
                a.element.symbol()
            )));
        }
        let n = atoms.len();
        Ok(Self {
            atoms,
            bonds: vec![BondType::None; n * n],
        })
    }

    /// Builds a graph from atoms and an undirected bond list.
    pub fn from_bonds(
        atoms: Vec<Atom>,
        bonds: &[(usize, usize, BondType)],
    ) -> Result<Self, ChemError> {
        let mut g = Self::with_atoms(atoms)?;
        for &(i, j, b) in bonds {
            g.set_bond(i, j, b)?;
        }
        Ok(g)
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> Atom {
        self.atoms[i]
    }

    pub(crate) fn atom_mut(&mut self, i: usize) -> &mut Atom {
        &mut self.atoms[i]
    }

    pub fn bond(&self, i: usize, j: usize) -> BondType {
        self.bonds[i * self.atoms.len() + j]
    }

    pub fn set_bond(&mut self, i: usize, j: usize, b: BondType) -> Result<(), ChemError> {
        let n = self.atoms.len();
        if i >= n || j >= n {
            return Err(ChemError::Invalid(format!("bond ({i},{j}) out of range for {n} atoms")));
        }
        if i == j {
            if b.is_bond() {
                return Err(ChemError::Invalid(format!("self bond on atom {i}")));
            }
            return Ok(());
        }
        if b == BondType::Aromatic && !(self.atoms[i].aromatic && self.atoms[j].aromatic) {
            return Err(ChemError::Invalid(format!(
                "aromatic bond ({i},{j}) between non-aromatic atoms"
            )));
        }
        self.bonds[i * n + j] = b;
        self.bonds[j * n + i] = b;
        Ok(())
    }

    /// `(neighbor, bond)` pairs in ascending neighbor order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, BondType)> + '_ {
        let n = self.atoms.len();
        self.bonds[i * n..(i + 1) * n]
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_bond())
            .map(|(j, &b)| (j, b))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Sum of bond orders with aromatic bonds counted once.
    pub fn sigma_valence(&self, i: usize) -> u32 {
        self.neighbors(i).map(|(_, b)| b.sigma_order()).sum()
    }

    /// Undirected bond list with `i < j`.
    pub fn bond_list(&self) -> Vec<(usize, usize, BondType)> {
        let n = self.atoms.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let b = self.bond(i, j);
                if b.is_bond() {
                    out.push((i, j, b));
                }
            }
        }
        out
    }

    pub fn num_bonds(&self) -> usize {
        self.bond_list().len()
    }

    /// Connected components as sorted atom index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            comp[start] = id;
            while let Some(u) = stack.pop() {
                members.push(u);
                for (v, _) in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Subgraph induced by `keep`, preserving the given order.
    pub fn induced(&self, keep: &[usize]) -> Result<MolGraph, ChemError> {
        let atoms = keep.iter().map(|&i| self.atoms[i]).collect();
        let mut g = MolGraph::with_atoms(atoms)?;
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate().skip(a + 1) {
                let bt = self.bond(i, j);
                if bt.is_bond() {
                    g.set_bond(a, b, bt)?;
                }
            }
        }
        Ok(g)
    }

    /// Largest connected component (ties go to the component with the lowest atom index).
    pub fn largest_component(&self) -> MolGraph {
        let comps = self.components();
        if comps.len() == 1 {
            return self.clone();
        }
        let best = comps
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(_, c)| c)
            .expect("graphs have at least one atom");
        self.induced(best).expect("a component of a valid graph is valid")
    }

    /// Relabels atoms: new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<MolGraph, ChemError> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(ChemError::Invalid("permutation is not a bijection".into()));
        }
        self.induced(order)
    }

    /// Re-checks every structural invariant.
    pub fn validate(&self) -> Result<(), ChemError> {
        let n = self.atoms.len();
        if n == 0 {
            return Err(ChemError::Empty);
        }
        if n > MAX_ATOMS {
            return Err(ChemError::TooManyAtoms(n));
        }
        for i in 0..n {
            if self.bond(i, i).is_bond() {
                return Err(ChemError::Invalid(format!("self bond on atom {i}")));
            }
            for j in 0..n {
                if self.bond(i, j) != self.bond(j, i) {
                    return Err(ChemError::Invalid(format!("asymmetric bond ({i},{j})")));
                }
                if self.bond(i, j) == BondType::Aromatic
                    && !(self.atoms[i].aromatic && self.atoms[j].aromatic)
                {
                    return Err(ChemError::Invalid(format!("aromatic bond ({i},{j}) on non-aromatic atom")));
                }
            }
        }
        Ok(())
    }
}
