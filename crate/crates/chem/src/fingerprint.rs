//! Hashed simple-path fingerprint.
//!
//! Every simple path of 0 to [`MAX_PATH_BONDS`] bonds is labelled by the
//! byte sequence atom, bond, atom, ... (atom byte `1 + element index + 16 *
//! aromatic`, bond byte `64 + bond index`), read in whichever direction is
//! lexicographically smaller. The label is hashed with 64-bit FNV-1a and the
//! bit `hash % 2048` is set.

use serde::{Deserialize, Serialize};

use crate::graph::MolGraph;

pub const FP_BITS: usize = 2048;
pub const MAX_PATH_BONDS: usize = 7;
const WORDS: usize = FP_BITS / 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    words: [u64; WORDS],
}

impl Default for Fingerprint {
    fn default() -> Self {
        Self { words: [0; WORDS] }
    }
}

impl Fingerprint {
    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn contains(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn intersection_count(&self, other: &Fingerprint) -> u32 {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones()).sum()
    }

    /// Indices of set bits in ascending order.
    pub fn bits(&self) -> Vec<usize> {
        (0..FP_BITS).filter(|&b| self.contains(b)).collect()
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Label bytes for the path `atoms` (consecutive atoms must be bonded).
pub fn path_label(g: &MolGraph, atoms: &[usize]) -> Vec<u8> {
    let atom_byte = |i: usize| {
        let a = g.atom(i);
        1 + a.element.index() as u8 + 16 * u8::from(a.aromatic)
    };
    let spell = |seq: &mut dyn Iterator<Item = usize>| {
        let seq: Vec<usize> = seq.collect();
        let mut out = Vec::with_capacity(2 * seq.len());
        for (k, &i) in seq.iter().enumerate() {
            if k > 0 {
                out.push(64 + g.bond(seq[k - 1], i).index() as u8);
            }
            out.push(atom_byte(i));
        }
        out
    };
    let fwd = spell(&mut atoms.iter().copied());
    let rev = spell(&mut atoms.iter().rev().copied());
    fwd.min(rev)
}

pub fn path_fingerprint(g: &MolGraph) -> Fingerprint {
    let mut fp = Fingerprint::default();
    let mut path = Vec::with_capacity(MAX_PATH_BONDS + 1);
    let mut on_path = vec![false; g.num_atoms()];
    for start in 0..g.num_atoms() {
        extend(g, start, &mut path, &mut on_path, &mut fp);
    }
    fp
}

fn extend(g: &MolGraph, u: usize, path: &mut Vec<usize>, on_path: &mut [bool], fp: &mut Fingerprint) {
    path.push(u);
    on_path[u] = true;
    // each path is reached from both ends; the canonical label makes that harmless
    fp.set((fnv1a64(&path_label(g, path)) % FP_BITS as u64) as usize);
    if path.len() <= MAX_PATH_BONDS {
        for (v, _) in g.neighbors(u) {
            if !on_path[v] {
                extend(g, v, path, on_path, fp);
            }
        }
    }
    on_path[u] = false;
    path.pop();
}

/// Cosine similarity of the two fingerprints' bit vectors.
pub fn similarity_f(a: &MolGraph, b: &MolGraph) -> f64 {
    Fingerprint::cosine(&path_fingerprint(a), &path_fingerprint(b))
}

impl Fingerprint {
    pub fn cosine(&self, other: &Fingerprint) -> f64 {
        let (na, nb) = (self.count_ones(), other.count_ones());
        if na == 0 || nb == 0 {
            return 0.0;
        }
        f64::from(self.intersection_count(other)) / (f64::from(na) * f64::from(nb)).sqrt()
    }
}
