//! Canonical codes for small vertex-labeled graphs.
//!
//! A code is the lexicographically smallest `(adjacency bits, label bits)`
//! pair over all vertex orderings. Adjacency bits run over the upper
//! triangle in row order `(0,1), (0,2), .., (1,2), ..` with the first pair
//! most significant; label bits put vertex 0 most significant.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{Graph, LabeledGraph};

/// Hard ceiling on motif size: 8 vertices keep adjacency within 28 bits and
/// the permutation search within 8! orderings.
pub const MAX_MOTIF_SIZE: usize = 8;
pub const DEFAULT_MOTIF_SIZE: usize = 5;

/// Isomorphism-invariant, label-respecting key for a small labeled graph.
///
/// Ordering is by size, then adjacency bits, then label bits, which is the
/// byte order of [`CanonicalCode::to_bytes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalCode {
    size: u8,
    adjacency: u32,
    labels: u8,
}

impl CanonicalCode {
    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn adjacency_bits(&self) -> u32 {
        self.adjacency
    }

    pub fn label_bits(&self) -> u8 {
        self.labels
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.count_ones() as usize
    }

    pub fn treated_count(&self) -> usize {
        self.labels.count_ones() as usize
    }

    /// `[size, adjacency (big endian, 4 bytes), labels]`.
    pub fn to_bytes(&self) -> [u8; 6] {
        let a = self.adjacency.to_be_bytes();
        [self.size, a[0], a[1], a[2], a[3], self.labels]
    }

    /// Hex of the adjacency and label bytes (everything but the size).
    pub fn hex(&self) -> String {
        self.to_bytes()[1..].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Column name used in feature tables and CSV headers: `g<size>_<hex>`.
    pub fn column_name(&self) -> String {
        format!("g{}_{}", self.size, self.hex())
    }

    /// Parses a name produced by [`CanonicalCode::column_name`].
    pub fn from_column_name(name: &str) -> Option<Self> {
        let rest = name.strip_prefix('g')?;
        let (size, hex) = rest.split_once('_')?;
        let size: u8 = size.parse().ok()?;
        if hex.len() != 10 || size as usize > MAX_MOTIF_SIZE {
            return None;
        }
        let adjacency = u32::from_str_radix(&hex[..8], 16).ok()?;
        let labels = u8::from_str_radix(&hex[8..], 16).ok()?;
        Some(Self {
            size,
            adjacency,
            labels,
        })
    }

    /// The representative labeled graph this code encodes.
    pub fn to_labeled_graph(&self) -> LabeledGraph {
        let k = self.size();
        let pairs = k * k.saturating_sub(1) / 2;
        let mut edges = Vec::new();
        let mut idx = 0;
        for i in 0..k {
            for j in i + 1..k {
                if self.adjacency >> (pairs - 1 - idx) & 1 == 1 {
                    edges.push((i, j));
                }
                idx += 1;
            }
        }
        let labels = (0..k).map(|v| self.labels >> (k - 1 - v) & 1 == 1).collect();
        LabeledGraph::new(Graph::new(k, edges).expect("code encodes a simple graph"), labels)
            .expect("label count matches size")
    }
}

impl fmt::Display for CanonicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.column_name())
    }
}

/// Packs `(rows, labels)` under vertex order `perm` into code bits.
#[inline]
fn pack(k: usize, rows: &[u8], labels: u8, perm: &[u8]) -> (u32, u8) {
    let mut adj = 0u32;
    for i in 0..k {
        let row = rows[perm[i] as usize];
        for &pj in &perm[i + 1..k] {
            adj = adj << 1 | (row >> pj & 1) as u32;
        }
    }
    let mut lab = 0u8;
    for &p in &perm[..k] {
        lab = lab << 1 | (labels >> p & 1);
    }
    (adj, lab)
}

fn permutations(k: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Vec<u8>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v as u8);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Memoizing canonicalizer. Local adjacency is passed as one bit row per
/// vertex (`rows[i] >> j & 1` marks edge `i-j`) and labels as a bit mask
/// (`labels >> i & 1` marks vertex `i` treated).
#[derive(Debug, Default)]
pub struct Canonicalizer {
    perms: Vec<Vec<Vec<u8>>>,
    memo: HashMap<(u8, u32, u8), CanonicalCode>,
}

impl Canonicalizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn canonicalize(&mut self, k: usize, rows: &[u8], labels: u8) -> CanonicalCode {
        debug_assert!(k <= MAX_MOTIF_SIZE);
        let identity: Vec<u8> = (0..k as u8).collect();
        let raw = pack(k, rows, labels, &identity);
        let key = (k as u8, raw.0, raw.1);
        if let Some(code) = self.memo.get(&key) {
            return *code;
        }
        while self.perms.len() <= k {
            let next = self.perms.len();
            self.perms.push(permutations(next));
        }
        let best = self.perms[k]
            .iter()
            .map(|perm| pack(k, rows, labels, perm))
            .min()
            .unwrap_or((0, 0));
        let code = CanonicalCode {
            size: k as u8,
            adjacency: best.0,
            labels: best.1,
        };
        self.memo.insert(key, code);
        code
    }

    pub fn code_of(&mut self, h: &LabeledGraph, cap: usize) -> Result<CanonicalCode> {
        let k = h.n();
        let cap = cap.min(MAX_MOTIF_SIZE);
        if k > cap {
            return Err(Error::MotifTooLarge { size: k, cap });
        }
        let mut rows = [0u8; MAX_MOTIF_SIZE];
        for (u, v) in h.graph.edges() {
            rows[u] |= 1 << v;
            rows[v] |= 1 << u;
        }
        let labels = h
            .labels
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &l)| acc | (l as u8) << i);
        Ok(self.canonicalize(k, &rows[..k], labels))
    }
}

/// Canonical code of `h`; `cap` is the configured motif size limit.
pub fn canonical_code(h: &LabeledGraph, cap: usize) -> Result<CanonicalCode> {
    Canonicalizer::new().code_of(h, cap)
}
