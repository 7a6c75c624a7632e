//! Undirected simple graphs, treatment labels and labeled neighborhood views.
//!
//! Vertices are dense `0..n` indices. Adjacency is kept both as sorted
//! neighbor lists (for enumeration) and as an O(1) edge index (a bit matrix
//! for graphs up to [`BITSET_LIMIT`] vertices, a hash set above that).

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};

/// Largest vertex count for which the edge index is a dense bit matrix.
pub const BITSET_LIMIT: usize = 16_384;

#[derive(Debug, Clone)]
enum EdgeIndex {
    Bits { words: usize, bits: Vec<u64> },
    Hash(HashSet<(usize, usize)>),
}

impl EdgeIndex {
    fn build(n: usize, adj: &[Vec<usize>]) -> Self {
        if n <= BITSET_LIMIT {
            let words = n.div_ceil(64).max(1);
            let mut bits = vec![0u64; n * words];
            for (u, nbrs) in adj.iter().enumerate() {
                for &v in nbrs {
                    bits[u * words + v / 64] |= 1 << (v % 64);
                }
            }
            EdgeIndex::Bits { words, bits }
        } else {
            let mut set = HashSet::new();
            for (u, nbrs) in adj.iter().enumerate() {
                for &v in nbrs {
                    if u < v {
                        set.insert((u, v));
                    }
                }
            }
            EdgeIndex::Hash(set)
        }
    }

    #[inline]
    fn contains(&self, u: usize, v: usize) -> bool {
        match self {
            EdgeIndex::Bits { words, bits } => bits[u * words + v / 64] >> (v % 64) & 1 == 1,
            EdgeIndex::Hash(set) => set.contains(&(u.min(v), u.max(v))),
        }
    }
}

/// An undirected simple graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
    index: EdgeIndex,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.adj == other.adj
    }
}

impl Eq for Graph {}

impl Graph {
    /// Builds a graph from an edge list. Duplicate edges (in either
    /// orientation) collapse to one; self-loops and out-of-range endpoints
    /// are rejected.
    pub fn new<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n {
                return Err(Error::VertexOutOfRange { vertex: u, n });
            }
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            if u == v {
                return Err(Error::input(format!("self-loop on vertex {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        Ok(Self::from_adjacency(adj))
    }

    fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Self {
        for nbrs in adj.iter_mut() {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        let edge_count = adj.iter().map(Vec::len).sum::<usize>() / 2;
        let index = EdgeIndex::build(adj.len(), &adj);
        Self { adj, edge_count, index }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_adjacency(vec![Vec::new(); n])
    }

    pub fn complete(n: usize) -> Self {
        let adj = (0..n).map(|u| (0..n).filter(|&v| v != u).collect()).collect();
        Self::from_adjacency(adj)
    }

    /// Path `0-1-...-(n-1)`.
    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (v - 1, v))).expect("valid path")
    }

    /// Cycle `0-1-...-(n-1)-0`; needs `n >= 3`.
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a simple cycle needs at least 3 vertices");
        Self::new(n, (0..n).map(|v| (v, (v + 1) % n))).expect("valid cycle")
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Self::new(leaves + 1, (1..=leaves).map(|v| (0, v))).expect("valid star")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adj.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbor list of `u`.
    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.index.contains(u, v)
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n() })
        }
    }

    /// Graph induced on `vertices`; local vertex `k` is `vertices[k]`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Result<Graph> {
        let mut local = vec![usize::MAX; self.n()];
        for (k, &v) in vertices.iter().enumerate() {
            self.check_vertex(v)?;
            if local[v] != usize::MAX {
                return Err(Error::input(format!("vertex {v} listed twice")));
            }
            local[v] = k;
        }
        let adj = vertices
            .iter()
            .map(|&v| {
                self.adj[v]
                    .iter()
                    .filter_map(|&w| (local[w] != usize::MAX).then_some(local[w]))
                    .collect()
            })
            .collect();
        Ok(Self::from_adjacency(adj))
    }

    /// Copy of this graph keeping only the edges for which `keep` holds.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Graph {
        let kept: Vec<_> = self.edges().filter(|&(u, v)| keep(u, v)).collect();
        Graph::new(self.n(), kept).expect("subset of a valid edge set")
    }

    /// Vertices within `hops` steps of `i`, sorted. The ego itself is
    /// included only when `include_ego` is set.
    pub fn neighborhood_vertices(&self, i: usize, hops: usize, include_ego: bool) -> Result<Vec<usize>> {
        self.check_vertex(i)?;
        if hops == 0 {
            return Err(Error::input("hops must be at least 1"));
        }
        let out = if hops == 1 {
            let mut out = self.adj[i].clone();
            if include_ego {
                let pos = out.binary_search(&i).unwrap_err();
                out.insert(pos, i);
            }
            out
        } else {
            let dist = self.bfs_distances(i, Some(hops));
            let mut out: Vec<usize> = dist
                .iter()
                .enumerate()
                .filter(|&(v, d)| d.is_some() && (include_ego || v != i))
                .map(|(v, _)| v)
                .collect();
            out.sort_unstable();
            out
        };
        Ok(out)
    }

    /// BFS hop distances from `src`, optionally truncated at `limit` hops.
    pub fn bfs_distances(&self, src: usize, limit: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            if limit.is_some_and(|l| du >= l) {
                continue;
            }
            for &w in &self.adj[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// Per-vertex binary treatment indicators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreatmentVector(Vec<bool>);

impl TreatmentVector {
    pub fn new(t: Vec<bool>) -> Self {
        Self(t)
    }

    /// From 0/1 indicators; any other value is an input error.
    pub fn from_indicators(t: &[u8]) -> Result<Self> {
        t.iter()
            .map(|&x| match x {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::input(format!("treatment indicator {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn all(n: usize, value: bool) -> Self {
        Self(vec![value; n])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn is_treated(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn n_treated(&self) -> usize {
        self.0.iter().filter(|&&x| x).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn check_against(&self, g: &Graph) -> Result<()> {
        if self.len() == g.n() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                what: "treatment vector vs graph vertices",
                expected: g.n(),
                actual: self.len(),
            })
        }
    }
}

/// Neighborhood extraction options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NeighborhoodOpts {
    pub hops: usize,
    pub include_ego: bool,
}

impl Default for NeighborhoodOpts {
    fn default() -> Self {
        Self {
            hops: 1,
            include_ego: false,
        }
    }
}

impl NeighborhoodOpts {
    pub fn with_ego() -> Self {
        Self {
            hops: 1,
            include_ego: true,
        }
    }
}

/// A small graph whose vertices carry treatment labels, remembering which
/// vertex of the parent graph each local vertex came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub labels: Vec<bool>,
    pub vertex_map: Vec<usize>,
}

impl LabeledGraph {
    pub fn new(graph: Graph, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != graph.n() {
            return Err(Error::LengthMismatch {
                what: "labels vs graph vertices",
                expected: graph.n(),
                actual: labels.len(),
            });
        }
        let vertex_map = (0..graph.n()).collect();
        Ok(Self {
            graph,
            labels,
            vertex_map,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Labeled graph induced on `vertices` of `g` with labels taken from `t`.
    pub fn induced(g: &Graph, t: &TreatmentVector, vertices: &[usize]) -> Result<Self> {
        t.check_against(g)?;
        let graph = g.induced_subgraph(vertices)?;
        let labels = vertices.iter().map(|&v| t.is_treated(v)).collect();
        Ok(Self {
            graph,
            labels,
            vertex_map: vertices.to_vec(),
        })
    }
}

/// The labeled neighborhood graph of unit `i`.
pub fn labeled_neighborhood(g: &Graph, t: &TreatmentVector, i: usize, opts: NeighborhoodOpts) -> Result<LabeledGraph> {
    t.check_against(g)?;
    let vertices = g.neighborhood_vertices(i, opts.hops, opts.include_ego)?;
    LabeledGraph::induced(g, t, &vertices)
}

/// Number of treated neighbors of `i`.
pub fn treated_degree(g: &Graph, t: &TreatmentVector, i: usize) -> usize {
    g.neighbors(i).iter().filter(|&&j| t.is_treated(j)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(bits: &[u8]) -> TreatmentVector {
        TreatmentVector::from_indicators(bits).unwrap()
    }

    #[test]
    fn induced_on_pair_of_triangle_is_an_edge() {
        let h = Graph::complete(3).induced_subgraph(&[0, 1]).unwrap();
        assert_eq!(h.n(), 2);
        assert_eq!(h.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn induced_on_nothing_is_empty() {
        let h = Graph::cycle(5).induced_subgraph(&[]).unwrap();
        assert_eq!(h.n(), 0);
        assert_eq!(h.edge_count(), 0);
    }

    #[test]
    fn induced_four_cycle_drops_chord_to_missing_vertex() {
        let h = Graph::cycle(4).induced_subgraph(&[0, 1, 2]).unwrap();
        assert_eq!(h.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn induced_rejects_bad_vertices() {
        let g = Graph::path(3);
        assert!(matches!(
            g.induced_subgraph(&[0, 3]),
            Err(Error::VertexOutOfRange { vertex: 3, n: 3 })
        ));
        assert!(g.induced_subgraph(&[1, 1]).is_err());
    }

    #[test]
    fn constructor_validates_and_dedups() {
        assert!(Graph::new(2, [(0, 0)]).is_err());
        assert!(Graph::new(2, [(0, 2)]).is_err());
        let g = Graph::new(2, [(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn neighborhoods() {
        let star = Graph::star(3);
        assert_eq!(star.neighborhood_vertices(0, 1, false).unwrap(), vec![1, 2, 3]);
        let path = Graph::path(4);
        assert_eq!(path.neighborhood_vertices(0, 2, false).unwrap(), vec![1, 2]);
        assert_eq!(path.neighborhood_vertices(0, 2, true).unwrap(), vec![0, 1, 2]);
        let lonely = Graph::empty(3);
        assert!(lonely.neighborhood_vertices(1, 1, false).unwrap().is_empty());
        assert!(path.neighborhood_vertices(0, 0, false).is_err());
    }

    #[test]
    fn labeled_neighborhood_examples() {
        let k3 = Graph::complete(3);
        let t = tv(&[1, 0, 1]);
        let h = labeled_neighborhood(&k3, &t, 0, NeighborhoodOpts::default()).unwrap();
        assert_eq!(h.n(), 2);
        assert_eq!(h.graph.edge_count(), 1);
        assert_eq!(h.labels, vec![false, true]);
        assert_eq!(h.vertex_map, vec![1, 2]);

        let ego = labeled_neighborhood(&k3, &t, 0, NeighborhoodOpts::with_ego()).unwrap();
        assert_eq!(ego.graph, Graph::complete(3));
        assert_eq!(ego.labels, vec![true, false, true]);

        let p = Graph::path(3);
        let h = labeled_neighborhood(&p, &tv(&[1, 1, 1]), 1, NeighborhoodOpts::default()).unwrap();
        assert_eq!(h.n(), 2);
        assert_eq!(h.graph.edge_count(), 0);
        assert_eq!(h.labels, vec![true, true]);

        assert!(matches!(
            labeled_neighborhood(&p, &tv(&[1, 0]), 0, NeighborhoodOpts::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn treated_degree_examples() {
        let k3 = Graph::complete(3);
        assert_eq!(treated_degree(&k3, &tv(&[1, 0, 1]), 0), 1);
        let g = Graph::cycle(6);
        let none = TreatmentVector::all(6, false);
        assert!((0..6).all(|i| treated_degree(&g, &none, i) == 0));
        let star = Graph::star(4);
        assert_eq!(treated_degree(&star, &tv(&[0, 1, 1, 1, 1]), 0), 4);
    }

    #[test]
    fn large_graphs_use_hash_index() {
        let n = BITSET_LIMIT + 10;
        let g = Graph::new(n, [(0, n - 1), (5, 7)]).unwrap();
        assert!(g.has_edge(n - 1, 0));
        assert!(g.has_edge(7, 5));
        assert!(!g.has_edge(0, 5));
    }
}
