//! Neighborhood motif census: per-unit counts of connected induced labeled
//! subgraphs, and the feature tables built from them.

mod canon;
mod esu;
mod table;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use canon::{canonical_code, CanonicalCode, Canonicalizer, DEFAULT_MOTIF_SIZE, MAX_MOTIF_SIZE};
pub use esu::{enumerate_connected_subgraphs, enumerate_with};
pub use table::{binarize, quantile_bins, BinScheme, Column, ColumnKind, CovariateColumn, FeatureTable};

use crate::error::{Error, Result};
use crate::graph::{labeled_neighborhood, Graph, NeighborhoodOpts, TreatmentVector};

/// Motif counts of one labeled graph. Absent codes count zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CensusVector {
    counts: BTreeMap<CanonicalCode, u64>,
}

impl CensusVector {
    pub fn get(&self, code: &CanonicalCode) -> u64 {
        self.counts.get(code).copied().unwrap_or(0)
    }

    pub(crate) fn add(&mut self, code: CanonicalCode, by: u64) {
        *self.counts.entry(code).or_insert(0) += by;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CanonicalCode, &u64)> {
        self.counts.iter()
    }

    pub fn codes(&self) -> impl Iterator<Item = &CanonicalCode> {
        self.counts.keys()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Sum of counts over codes with `size` vertices.
    pub fn total_of_size(&self, size: usize) -> u64 {
        self.counts
            .iter()
            .filter(|(c, _)| c.size() == size)
            .map(|(_, n)| n)
            .sum()
    }
}

impl FromIterator<(CanonicalCode, u64)> for CensusVector {
    fn from_iter<I: IntoIterator<Item = (CanonicalCode, u64)>>(iter: I) -> Self {
        let mut out = CensusVector::default();
        for (code, n) in iter {
            if n > 0 {
                out.add(code, n);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusOpts {
    pub neighborhood: NeighborhoodOpts,
    pub max_size: usize,
}

impl Default for CensusOpts {
    fn default() -> Self {
        Self {
            neighborhood: NeighborhoodOpts::default(),
            max_size: DEFAULT_MOTIF_SIZE,
        }
    }
}

/// Census of every unit plus the ordered code universe (size, then bytes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Census {
    pub units: Vec<CensusVector>,
    pub universe: Vec<CanonicalCode>,
}

impl Census {
    pub fn from_units(units: Vec<CensusVector>) -> Self {
        let universe: BTreeSet<CanonicalCode> = units.iter().flat_map(|c| c.codes().copied()).collect();
        Self {
            units,
            universe: universe.into_iter().collect(),
        }
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    /// Dense `units x universe` count matrix.
    pub fn matrix(&self) -> Vec<Vec<u64>> {
        self.units
            .iter()
            .map(|c| self.universe.iter().map(|code| c.get(code)).collect())
            .collect()
    }
}

/// Runs the census over every unit's labeled neighborhood in parallel. The
/// universe is merged in canonical order so results do not depend on the
/// thread schedule.
pub fn census_all_units(g: &Graph, t: &TreatmentVector, opts: CensusOpts) -> Result<Census> {
    t.check_against(g)?;
    if opts.max_size == 0 {
        return Err(Error::input("motif size must be at least 1"));
    }
    if opts.max_size > MAX_MOTIF_SIZE {
        return Err(Error::MotifTooLarge {
            size: opts.max_size,
            cap: MAX_MOTIF_SIZE,
        });
    }
    let units = (0..g.n())
        .into_par_iter()
        .map_init(Canonicalizer::new, |canon, i| {
            let h = labeled_neighborhood(g, t, i, opts.neighborhood)?;
            Ok(enumerate_with(&h, opts.max_size, canon))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Census::from_units(units))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LabeledGraph;
    use proptest::prelude::*;

    fn lg(n: usize, edges: &[(usize, usize)], labels: &[u8]) -> LabeledGraph {
        LabeledGraph::new(
            Graph::new(n, edges.iter().copied()).unwrap(),
            labels.iter().map(|&x| x == 1).collect(),
        )
        .unwrap()
    }

    fn code(n: usize, edges: &[(usize, usize)], labels: &[u8]) -> CanonicalCode {
        canonical_code(&lg(n, edges, labels), MAX_MOTIF_SIZE).unwrap()
    }

    /// Subset brute force: every vertex subset up to `max_size`, kept when
    /// its induced graph is connected.
    fn brute_force(h: &LabeledGraph, max_size: usize) -> CensusVector {
        let n = h.n();
        let mut out = CensusVector::default();
        for mask in 1u32..(1 << n) {
            let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            if verts.len() > max_size {
                continue;
            }
            let sub = LabeledGraph::induced(&h.graph, &TreatmentVector::new(h.labels.clone()), &verts).unwrap();
            let reach = sub.graph.bfs_distances(0, None);
            if reach.iter().all(Option::is_some) {
                out.add(canonical_code(&sub, MAX_MOTIF_SIZE).unwrap(), 1);
            }
        }
        out
    }

    #[test]
    fn triangle_census() {
        let h = lg(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 0]);
        let c = enumerate_connected_subgraphs(&h, 3);
        assert_eq!(c.len(), 3);
        assert_eq!(c.get(&code(1, &[], &[0])), 3);
        assert_eq!(c.get(&code(2, &[(0, 1)], &[0, 0])), 3);
        assert_eq!(c.get(&code(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 0])), 1);
        assert_eq!(c, brute_force(&h, 3));
    }

    #[test]
    fn edgeless_graph_only_has_singletons() {
        let h = lg(4, &[], &[0, 0, 0, 0]);
        let c = enumerate_connected_subgraphs(&h, 5);
        assert_eq!(c.len(), 1);
        assert_eq!(c.get(&code(1, &[], &[0])), 4);
    }

    #[test]
    fn labeled_path_up_to_edges() {
        let h = lg(3, &[(0, 1), (1, 2)], &[1, 0, 1]);
        let c = enumerate_connected_subgraphs(&h, 2);
        assert_eq!(c.len(), 3);
        assert_eq!(c.get(&code(1, &[], &[1])), 2);
        assert_eq!(c.get(&code(1, &[], &[0])), 1);
        assert_eq!(c.get(&code(2, &[(0, 1)], &[1, 0])), 2);
    }

    #[test]
    fn edgeless_graph_universe_has_two_singletons_at_most() {
        let g = Graph::empty(6);
        let t = TreatmentVector::from_indicators(&[1, 0, 1, 0, 1, 0]).unwrap();
        let census = census_all_units(&g, &t, CensusOpts::default()).unwrap();
        assert!(census.universe.is_empty());
        let census = census_all_units(
            &g,
            &t,
            CensusOpts {
                neighborhood: NeighborhoodOpts::with_ego(),
                max_size: 5,
            },
        )
        .unwrap();
        assert_eq!(census.universe.len(), 2);
    }

    #[test]
    fn isomorphic_neighborhoods_share_census() {
        // 0 and 3 both see a treated-control edge
        let g = Graph::new(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]).unwrap();
        let t = TreatmentVector::from_indicators(&[0, 1, 0, 0, 0, 1]).unwrap();
        let census = census_all_units(&g, &t, CensusOpts::default()).unwrap();
        assert_eq!(census.units[0], census.units[3]);
        assert_ne!(census.units[0], census.units[1]);
    }

    #[test]
    fn rejects_bad_options() {
        let g = Graph::path(3);
        let t = TreatmentVector::all(3, false);
        let opts = CensusOpts {
            max_size: 0,
            ..CensusOpts::default()
        };
        assert!(census_all_units(&g, &t, opts).is_err());
        let opts = CensusOpts {
            max_size: 9,
            ..CensusOpts::default()
        };
        assert!(census_all_units(&g, &t, opts).is_err());
    }

    fn arb_labeled_graph(max_n: usize) -> impl Strategy<Value = LabeledGraph> {
        (1..=max_n).prop_flat_map(|n| {
            let pairs = n * (n - 1) / 2;
            (
                proptest::collection::vec(any::<bool>(), pairs),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(mask, labels)| {
                    let mut edges = Vec::new();
                    let mut k = 0;
                    for i in 0..n {
                        for j in i + 1..n {
                            if mask[k] {
                                edges.push((i, j));
                            }
                            k += 1;
                        }
                    }
                    LabeledGraph::new(Graph::new(n, edges).unwrap(), labels).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn esu_matches_brute_force(h in arb_labeled_graph(8), max_size in 1usize..=5) {
            prop_assert_eq!(enumerate_connected_subgraphs(&h, max_size), brute_force(&h, max_size));
        }

        #[test]
        fn census_is_permutation_invariant(h in arb_labeled_graph(7), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let n = h.n();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let edges: Vec<_> = h.graph.edges().map(|(u, v)| (perm[u], perm[v])).collect();
            let mut labels = vec![false; n];
            for v in 0..n {
                labels[perm[v]] = h.labels[v];
            }
            let moved = LabeledGraph::new(Graph::new(n, edges).unwrap(), labels).unwrap();
            prop_assert_eq!(enumerate_connected_subgraphs(&h, 4), enumerate_connected_subgraphs(&moved, 4));
        }

        #[test]
        fn size_totals_count_connected_subsets(h in arb_labeled_graph(8)) {
            let c = enumerate_connected_subgraphs(&h, 4);
            let n = h.n();
            for s in 1..=4usize {
                let mut expected = 0u64;
                for mask in 1u32..(1 << n) {
                    if mask.count_ones() as usize != s { continue; }
                    let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
                    let sub = h.graph.induced_subgraph(&verts).unwrap();
                    if sub.bfs_distances(0, None).iter().all(Option::is_some) {
                        expected += 1;
                    }
                }
                prop_assert_eq!(c.total_of_size(s), expected);
            }
        }
    }
}
