use crate::graph::{Atom, BondType, Element, MolGraph, MAX_ATOMS};
use crate::ChemError;

/// Problems found while reading a SMILES string.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesError {
    #[error("empty SMILES")]
    Empty,
    #[error("unknown atom symbol `{symbol}` at position {pos}")]
    UnknownAtom { symbol: String, pos: usize },
    #[error("unmatched parenthesis at position {pos}")]
    UnmatchedParen { pos: usize },
    #[error("unclosed ring bond {label}")]
    UnclosedRing { label: u32 },
    #[error("too many atoms: {0} (limit {MAX_ATOMS})")]
    AtomCount(usize),
    #[error("unsupported feature `{feature}` at position {pos}")]
    Unsupported { feature: String, pos: usize },
    #[error("unexpected character `{ch}` at position {pos}")]
    Unexpected { ch: char, pos: usize },
    #[error("invalid bond at position {pos}: {reason}")]
    InvalidBond { pos: usize, reason: String },
}

impl SmilesError {
    /// Stable short name of the failure kind.
    pub fn kind(&self) -> &'static str {
        match self {
            SmilesError::Empty => "empty",
            SmilesError::UnknownAtom { .. } => "unknown_atom",
            SmilesError::UnmatchedParen { .. } => "unmatched_paren",
            SmilesError::UnclosedRing { .. } => "unclosed_ring",
            SmilesError::AtomCount(_) => "atom_count",
            SmilesError::Unsupported { .. } => "unsupported",
            SmilesError::Unexpected { .. } => "unexpected",
            SmilesError::InvalidBond { .. } => "invalid_bond",
        }
    }
}

/// A parsed graph plus notes about input that was accepted but ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSmiles {
    pub graph: MolGraph,
    /// `/`, `\` or `@` markers were present and skipped.
    pub stereo_skipped: bool,
}

/// Parses the supported SMILES subset into a heavy-atom graph.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    parse_smiles_detailed(text).map(|p| p.graph)
}

pub fn parse_smiles_detailed(text: &str) -> Result<ParsedSmiles, SmilesError> {
    Parser::new(text).run()
}

struct OpenRing {
    atom: usize,
    bond: Option<BondType>,
    pos: usize,
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<(usize, usize, BondType, usize)>,
    rings: Vec<(u32, OpenRing)>,
    stack: Vec<(usize, usize)>,
    prev: Option<usize>,
    pending_bond: Option<(BondType, usize)>,
    stereo: bool,
}

impl Parser {
    fn new(src: &str) -> Self {
        Self {
            chars: src.trim().chars().collect(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            rings: Vec::new(),
            stack: Vec::new(),
            prev: None,
            pending_bond: None,
            stereo: false,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn run(mut self) -> Result<ParsedSmiles, SmilesError> {
        if self.chars.is_empty() {
            return Err(SmilesError::Empty);
        }
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                '(' => {
                    let anchor = self.prev.ok_or(SmilesError::Unexpected { ch: c, pos: start })?;
                    if self.pending_bond.is_some() {
                        return Err(SmilesError::Unexpected { ch: c, pos: start });
                    }
                    self.stack.push((anchor, start));
                    self.pos += 1;
                }
                ')' => {
                    let (anchor, _) = self
                        .stack
                        .pop()
                        .ok_or(SmilesError::UnmatchedParen { pos: start })?;
                    if self.pending_bond.is_some() {
                        return Err(SmilesError::Unexpected { ch: c, pos: start });
                    }
                    self.prev = Some(anchor);
                    self.pos += 1;
                }
                '-' | '=' | '#' | ':' | '/' | '\\' => {
                    if self.pending_bond.is_some() || self.prev.is_none() {
                        return Err(SmilesError::Unexpected { ch: c, pos: start });
                    }
                    let b = match c {
                        '=' => BondType::Double,
                        '#' => BondType::Triple,
                        ':' => BondType::Aromatic,
                        '/' | '\\' => {
                            self.stereo = true;
                            BondType::Single
                        }
                        _ => BondType::Single,
                    };
                    self.pending_bond = Some((b, start));
                    self.pos += 1;
                }
                '.' => {
                    if self.pending_bond.is_some() || self.prev.is_none() {
                        return Err(SmilesError::Unexpected { ch: c, pos: start });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                '0'..='9' | '%' => self.ring_closure()?,
                '[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, start)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom, start)?;
                }
            }
        }
        if let Some((_, pos)) = self.stack.last() {
            return Err(SmilesError::UnmatchedParen { pos: *pos });
        }
        if let Some((label, _)) = self.rings.first() {
            return Err(SmilesError::UnclosedRing { label: *label });
        }
        if let Some((_, pos)) = self.pending_bond {
            return Err(SmilesError::InvalidBond {
                pos,
                reason: "dangling bond symbol".into(),
            });
        }
        let mut graph = MolGraph::with_atoms(self.atoms.clone()).map_err(|e| match e {
            ChemError::TooManyAtoms(n) => SmilesError::AtomCount(n),
            _ => SmilesError::Empty,
        })?;
        for &(i, j, b, pos) in &self.bonds {
            if graph.bond(i, j).is_bond() {
                return Err(SmilesError::InvalidBond {
                    pos,
                    reason: format!("duplicate bond between atoms {i} and {j}"),
                });
            }
            graph.set_bond(i, j, b).map_err(|e| SmilesError::InvalidBond {
                pos,
                reason: e.to_string(),
            })?;
        }
        Ok(ParsedSmiles {
            graph,
            stereo_skipped: self.stereo,
        })
    }

    fn default_bond(&self, a: usize, b: usize) -> BondType {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondType::Aromatic
        } else {
            BondType::Single
        }
    }

    fn add_atom(&mut self, atom: Atom, pos: usize) -> Result<(), SmilesError> {
        if self.atoms.len() == MAX_ATOMS {
            // count the rest so the error reports the real size
            let extra = self.count_remaining_atoms();
            return Err(SmilesError::AtomCount(MAX_ATOMS + 1 + extra));
        }
        self.atoms.push(atom);
        let idx = self.atoms.len() - 1;
        if let Some(p) = self.prev {
            let b = match self.pending_bond.take() {
                Some((b, _)) => b,
                None => self.default_bond(p, idx),
            };
            self.bonds.push((p, idx, b, pos));
        } else if let Some((_, bpos)) = self.pending_bond {
            return Err(SmilesError::InvalidBond {
                pos: bpos,
                reason: "bond without a preceding atom".into(),
            });
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn count_remaining_atoms(&mut self) -> usize {
        let mut n = 0;
        while let Some(c) = self.peek() {
            if c == '[' {
                n += 1;
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == ']' {
                        break;
                    }
                }
                continue;
            }
            if c.is_ascii_alphabetic() {
                let two: String = self.chars[self.pos..].iter().take(2).collect();
                if two == "Cl" || two == "Br" {
                    self.pos += 1;
                }
                n += 1;
            }
            self.pos += 1;
        }
        n
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let c = self.peek().expect("caller checked");
        let next = self.chars.get(self.pos + 1).copied();
        let (atom, len) = match (c, next) {
            ('C', Some('l')) => (Atom::new(Element::Cl), 2),
            ('B', Some('r')) => (Atom::new(Element::Br), 2),
            ('C', _) => (Atom::new(Element::C), 1),
            ('N', _) => (Atom::new(Element::N), 1),
            ('O', _) => (Atom::new(Element::O), 1),
            ('F', _) => (Atom::new(Element::F), 1),
            ('P', _) => (Atom::new(Element::P), 1),
            ('S', _) => (Atom::new(Element::S), 1),
            ('I', _) => (Atom::new(Element::I), 1),
            ('c', _) => (Atom::aromatic(Element::C), 1),
            ('n', _) => (Atom::aromatic(Element::N), 1),
            ('o', _) => (Atom::aromatic(Element::O), 1),
            ('p', _) => (Atom::aromatic(Element::P), 1),
            ('s', _) => (Atom::aromatic(Element::S), 1),
            (ch, _) if ch.is_ascii_alphabetic() || ch == '*' => {
                return Err(SmilesError::UnknownAtom {
                    symbol: ch.to_string(),
                    pos: start,
                })
            }
            (ch, _) => return Err(SmilesError::Unexpected { ch, pos: start }),
        };
        self.pos += len;
        Ok(atom)
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let close = self.chars[self.pos..]
            .iter()
            .position(|&c| c == ']')
            .map(|p| p + self.pos)
            .ok_or(SmilesError::Unexpected { ch: '[', pos: open })?;
        let body: Vec<char> = self.chars[self.pos..close].to_vec();
        self.pos = close + 1;
        let mut i = 0;
        if body.first().is_some_and(|c| c.is_ascii_digit()) {
            return Err(SmilesError::Unsupported {
                feature: "isotope".into(),
                pos: open + 1,
            });
        }
        let mut symbol = String::new();
        if let Some(&c) = body.first() {
            symbol.push(c);
            i = 1;
            if let Some(&c2) = body.get(1) {
                if c.is_ascii_uppercase() && c2.is_ascii_lowercase() {
                    symbol.push(c2);
                    i = 2;
                }
            }
        }
        let aromatic = symbol.chars().next().is_some_and(|c| c.is_ascii_lowercase());
        let element = if aromatic {
            let mut up = symbol.clone();
            up[..1].make_ascii_uppercase();
            Element::from_symbol(&up).filter(|e| e.can_be_aromatic())
        } else {
            Element::from_symbol(&symbol)
        }
        .ok_or_else(|| SmilesError::UnknownAtom {
            symbol: symbol.clone(),
            pos: open + 1,
        })?;
        while i < body.len() {
            let c = body[i];
            match c {
                '@' => {
                    self.stereo = true;
                    i += 1;
                }
                'H' => {
                    // hydrogen counts are implicit in the heavy-atom graph
                    i += 1;
                    while i < body.len() && body[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                '+' | '-' => {
                    return Err(SmilesError::Unsupported {
                        feature: "charge".into(),
                        pos: open + 1 + i,
                    })
                }
                ':' => {
                    return Err(SmilesError::Unsupported {
                        feature: "atom class".into(),
                        pos: open + 1 + i,
                    })
                }
                _ => return Err(SmilesError::Unexpected { ch: c, pos: open + 1 + i }),
            }
        }
        Ok(Atom { element, aromatic })
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let label = if self.peek() == Some('%') {
            let d: String = self.chars[self.pos + 1..].iter().take(2).collect();
            if d.len() != 2 || !d.chars().all(|c| c.is_ascii_digit()) {
                return Err(SmilesError::Unexpected { ch: '%', pos: start });
            }
            self.pos += 3;
            d.parse::<u32>().expect("two digits")
        } else {
            let d = self.peek().and_then(|c| c.to_digit(10)).expect("caller checked");
            self.pos += 1;
            d
        };
        let atom = self.prev.ok_or(SmilesError::Unexpected {
            ch: self.chars[start],
            pos: start,
        })?;
        let bond = self.pending_bond.take().map(|(b, _)| b);
        if let Some(k) = self.rings.iter().position(|(l, _)| *l == label) {
            let (_, open) = self.rings.remove(k);
            if open.atom == atom {
                return Err(SmilesError::InvalidBond {
                    pos: start,
                    reason: "ring bond to itself".into(),
                });
            }
            let b = match (open.bond, bond) {
                (Some(a), Some(b)) if a != b => {
                    return Err(SmilesError::InvalidBond {
                        pos: start,
                        reason: format!("conflicting ring bond symbols for label {label}"),
                    })
                }
                (Some(b), _) | (None, Some(b)) => b,
                (None, None) => self.default_bond(open.atom, atom),
            };
            self.bonds.push((open.atom, atom, b, open.pos));
        } else {
            self.rings.push((label, OpenRing { atom, bond, pos: start }));
        }
        Ok(())
    }
}
