//! ESU enumeration of connected induced subgraphs.
//!
//! Every connected vertex subset of size `1..=max_size` is reached exactly
//! once in the ESU tree: a subset is grown from its smallest vertex, and new
//! candidates are restricted to exclusive neighbors larger than that root.

use crate::census::canon::{Canonicalizer, MAX_MOTIF_SIZE};
use crate::census::CensusVector;
use crate::graph::LabeledGraph;

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    #[inline]
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn pop_lowest(&mut self) -> Option<usize> {
        for (w, word) in self.0.iter_mut().enumerate() {
            if *word != 0 {
                let b = word.trailing_zeros() as usize;
                *word &= *word - 1;
                return Some(w * 64 + b);
            }
        }
        None
    }
}

struct Esu<'a> {
    h: &'a LabeledGraph,
    max_size: usize,
    canon: &'a mut Canonicalizer,
    out: &'a mut CensusVector,
    sub: Vec<usize>,
    rows: [u8; MAX_MOTIF_SIZE],
    labels: u8,
}

impl Esu<'_> {
    fn push(&mut self, w: usize) {
        let k = self.sub.len();
        let mut row = 0u8;
        for (a, &u) in self.sub.iter().enumerate() {
            if self.h.graph.has_edge(u, w) {
                row |= 1 << a;
                self.rows[a] |= 1 << k;
            }
        }
        self.rows[k] = row;
        if self.h.labels[w] {
            self.labels |= 1 << k;
        }
        self.sub.push(w);
    }

    fn pop(&mut self) {
        self.sub.pop();
        let k = self.sub.len();
        self.rows[k] = 0;
        for row in self.rows[..k].iter_mut() {
            *row &= !(1 << k);
        }
        self.labels &= !(1 << k);
    }

    fn record(&mut self) {
        let k = self.sub.len();
        let code = self.canon.canonicalize(k, &self.rows[..k], self.labels);
        self.out.add(code, 1);
    }

    fn extend(&mut self, mut ext: Bits, closed: Bits, root: usize) {
        self.record();
        if self.sub.len() == self.max_size {
            return;
        }
        while let Some(w) = ext.pop_lowest() {
            let mut ext2 = ext.clone();
            let mut closed2 = closed.clone();
            for &u in self.h.graph.neighbors(w) {
                if u > root && !closed.contains(u) {
                    ext2.insert(u);
                }
                closed2.insert(u);
            }
            self.push(w);
            self.extend(ext2, closed2, root);
            self.pop();
        }
    }
}

/// Counts every connected induced subgraph of `h` with `1..=max_size`
/// vertices, keyed by canonical code. `max_size` is clamped to
/// [`MAX_MOTIF_SIZE`].
pub fn enumerate_with(h: &LabeledGraph, max_size: usize, canon: &mut Canonicalizer) -> CensusVector {
    let mut out = CensusVector::default();
    let max_size = max_size.min(MAX_MOTIF_SIZE);
    if max_size == 0 {
        return out;
    }
    let n = h.n();
    let mut esu = Esu {
        h,
        max_size,
        canon,
        out: &mut out,
        sub: Vec::with_capacity(max_size),
        rows: [0; MAX_MOTIF_SIZE],
        labels: 0,
    };
    for root in 0..n {
        let mut ext = Bits::new(n);
        let mut closed = Bits::new(n);
        closed.insert(root);
        for &u in h.graph.neighbors(root) {
            if u > root {
                ext.insert(u);
            }
            closed.insert(u);
        }
        esu.push(root);
        esu.extend(ext, closed, root);
        esu.pop();
    }
    out
}

/// [`enumerate_with`] using a fresh canonicalizer.
pub fn enumerate_connected_subgraphs(h: &LabeledGraph, max_size: usize) -> CensusVector {
    enumerate_with(h, max_size, &mut Canonicalizer::new())
}
