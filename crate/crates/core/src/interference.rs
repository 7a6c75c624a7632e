//! Interference components: treated-motif counts on each unit's
//! ego-included neighborhood graph, centralities, and z-scoring.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{treated_degree, Graph, LabeledGraph, TreatmentVector};

/// One interference component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    /// Number of treated neighbors.
    TreatedDegree,
    /// Plain degree.
    Degree,
    /// Triangles of the ego-included neighborhood with a treated vertex.
    Triangles,
    /// `k`-stars of the ego-included neighborhood with a treated member.
    Stars(usize),
    /// Ego-neighborhood vertices with degree `>= k` and a treated neighbor.
    Dagger(usize),
    Betweenness,
    Closeness,
}

impl Component {
    /// The seven additive components in weight order `gamma_1..gamma_7`.
    pub const STANDARD: [Component; 7] = [
        Component::TreatedDegree,
        Component::Triangles,
        Component::Stars(2),
        Component::Stars(4),
        Component::Dagger(3),
        Component::Betweenness,
        Component::Closeness,
    ];

    pub fn name(&self) -> String {
        match self {
            Component::TreatedDegree => "d".into(),
            Component::Degree => "degree".into(),
            Component::Triangles => "triangles".into(),
            Component::Stars(k) => format!("star{k}"),
            Component::Dagger(k) => format!("dagger{k}"),
            Component::Betweenness => "betweenness".into(),
            Component::Closeness => "closeness".into(),
        }
    }
}

/// Graph on which betweenness and closeness are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentralityScope {
    /// The unit's ego-included neighborhood graph.
    #[default]
    Neighborhood,
    /// The whole graph.
    Global,
}

/// Units x named components.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ComponentMatrix {
    pub fn n_units(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.names.iter().position(|n| n == name).map(|j| self.column(j))
    }
}

fn ego_graph(g: &Graph, t: &TreatmentVector, i: usize) -> LabeledGraph {
    let vertices = g.neighborhood_vertices(i, 1, true).expect("vertex in range");
    LabeledGraph::induced(g, t, &vertices).expect("vertices in range")
}

fn ego_position(h: &LabeledGraph, i: usize) -> usize {
    h.vertex_map.iter().position(|&v| v == i).expect("ego present")
}

fn triangles_in(h: &LabeledGraph) -> usize {
    let g = &h.graph;
    let mut count = 0;
    for (a, b) in g.edges() {
        for &c in g.neighbors(b) {
            if c > b && g.has_edge(a, c) && (h.labels[a] || h.labels[b] || h.labels[c]) {
                count += 1;
            }
        }
    }
    count
}

fn binom(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, j| acc * (n - j) as u64 / (j + 1) as u64)
}

fn kstars_in(h: &LabeledGraph, k: usize) -> u64 {
    let g = &h.graph;
    (0..g.n())
        .map(|c| {
            let deg = g.degree(c);
            let all = binom(deg, k);
            if h.labels[c] {
                all
            } else {
                let untreated = g.neighbors(c).iter().filter(|&&v| !h.labels[v]).count();
                all - binom(untreated, k)
            }
        })
        .sum()
}

fn dagger_in(h: &LabeledGraph, k: usize) -> usize {
    let g = &h.graph;
    (0..g.n())
        .filter(|&v| g.degree(v) >= k && g.neighbors(v).iter().any(|&w| h.labels[w]))
        .count()
}

/// Triangles of `i`'s ego-included neighborhood graph with at least one
/// treated vertex.
pub fn treated_triangles(g: &Graph, t: &TreatmentVector, i: usize) -> usize {
    triangles_in(&ego_graph(g, t, i))
}

/// `k`-stars (a center and `k` of its neighbors, not necessarily induced)
/// of `i`'s ego-included neighborhood graph with at least one treated member.
pub fn treated_kstars(g: &Graph, t: &TreatmentVector, i: usize, k: usize) -> Result<u64> {
    if k < 2 {
        return Err(Error::input("k-stars need k >= 2"));
    }
    Ok(kstars_in(&ego_graph(g, t, i), k))
}

/// Vertices of `i`'s ego-included neighborhood graph with degree `>= k` and
/// at least one treated neighbor, both measured inside that graph.
pub fn dagger(g: &Graph, t: &TreatmentVector, i: usize, k: usize) -> Result<usize> {
    if k < 1 {
        return Err(Error::input("dagger threshold must be at least 1"));
    }
    Ok(dagger_in(&ego_graph(g, t, i), k))
}

/// Normalized vertex betweenness: the sum over unordered pairs `{j, k}` not
/// containing `v` of the fraction of shortest `j-k` paths through `v`,
/// scaled by `2 / ((n-1)(n-2))`. Zero when `n < 3`.
pub fn betweenness(g: &Graph, v: usize) -> f64 {
    let n = g.n();
    if n < 3 {
        return 0.0;
    }
    // Brandes accumulation from every source except v; each unordered pair is
    // seen from both endpoints.
    let mut total = 0.0;
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in (0..n).filter(|&s| s != v) {
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &w in g.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[u] + 1 {
                    sigma[w] += sigma[u];
                }
            }
        }
        for &w in order.iter().rev() {
            for &u in g.neighbors(w) {
                if dist[u] != usize::MAX && dist[u] + 1 == dist[w] {
                    delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
                }
            }
        }
        total += delta[v];
    }
    let raw = total / 2.0;
    raw * 2.0 / ((n - 1) * (n - 2)) as f64
}

/// Normalized closeness: `(m - 1) / sum of distances` over the `m` vertices
/// of `v`'s connected component. An isolated vertex scores 0.
pub fn closeness(g: &Graph, v: usize) -> f64 {
    let dist = g.bfs_distances(v, None);
    let (reached, sum) = dist
        .iter()
        .flatten()
        .fold((0usize, 0usize), |(c, s), &d| (c + 1, s + d));
    if reached <= 1 || sum == 0 {
        0.0
    } else {
        (reached - 1) as f64 / sum as f64
    }
}

fn component_value(
    c: Component,
    g: &Graph,
    t: &TreatmentVector,
    h: &LabeledGraph,
    i: usize,
    scope: CentralityScope,
) -> f64 {
    match c {
        Component::TreatedDegree => treated_degree(g, t, i) as f64,
        Component::Degree => g.degree(i) as f64,
        Component::Triangles => triangles_in(h) as f64,
        Component::Stars(k) => kstars_in(h, k) as f64,
        Component::Dagger(k) => dagger_in(h, k) as f64,
        Component::Betweenness => match scope {
            CentralityScope::Neighborhood => betweenness(&h.graph, ego_position(h, i)),
            CentralityScope::Global => betweenness(g, i),
        },
        Component::Closeness => match scope {
            CentralityScope::Neighborhood => closeness(&h.graph, ego_position(h, i)),
            CentralityScope::Global => closeness(g, i),
        },
    }
}

/// Raw component values for every unit.
pub fn compute_components(
    g: &Graph,
    t: &TreatmentVector,
    components: &[Component],
    scope: CentralityScope,
) -> Result<ComponentMatrix> {
    t.check_against(g)?;
    for c in components {
        match *c {
            Component::Stars(k) if k < 2 => return Err(Error::input("k-stars need k >= 2")),
            Component::Dagger(0) => return Err(Error::input("dagger threshold must be at least 1")),
            _ => {}
        }
    }
    let rows = (0..g.n())
        .into_par_iter()
        .map(|i| {
            let h = ego_graph(g, t, i);
            components
                .iter()
                .map(|&c| component_value(c, g, t, &h, i, scope))
                .collect()
        })
        .collect();
    Ok(ComponentMatrix {
        names: components.iter().map(Component::name).collect(),
        rows,
    })
}

/// Column-wise z-scores with the sample (n-1) standard deviation; constant
/// columns become zeros.
pub fn zscore_normalize(m: &ComponentMatrix) -> Result<ComponentMatrix> {
    let n = m.n_units();
    if n < 2 {
        return Err(Error::input("z-scoring needs at least 2 units"));
    }
    let mut rows = m.rows.clone();
    for j in 0..m.names.len() {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        for (row, x) in rows.iter_mut().zip(&col) {
            row[j] = if sd > 1e-12 * (1.0 + mean.abs()) {
                (x - mean) / sd
            } else {
                0.0
            };
        }
    }
    Ok(ComponentMatrix {
        names: m.names.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tv(bits: &[u8]) -> TreatmentVector {
        TreatmentVector::from_indicators(bits).unwrap()
    }

    #[test]
    fn triangle_counts() {
        let k3 = Graph::complete(3);
        assert_eq!(treated_triangles(&k3, &tv(&[1, 0, 1]), 0), 1);
        assert_eq!(treated_triangles(&k3, &tv(&[0, 0, 0]), 0), 0);
        let k4 = Graph::complete(4);
        assert_eq!(treated_triangles(&k4, &TreatmentVector::all(4, true), 0), 4);
    }

    #[test]
    fn star_counts() {
        let k3 = Graph::complete(3);
        assert_eq!(treated_kstars(&k3, &tv(&[0, 1, 0]), 0, 2).unwrap(), 3);
        let star = Graph::star(4);
        assert_eq!(treated_kstars(&star, &TreatmentVector::all(5, true), 0, 4).unwrap(), 1);
        let p2 = Graph::path(2);
        assert_eq!(treated_kstars(&p2, &tv(&[1, 1]), 0, 2).unwrap(), 0);
        assert!(treated_kstars(&p2, &tv(&[1, 1]), 0, 1).is_err());
    }

    #[test]
    fn dagger_counts() {
        let k3 = Graph::complete(3);
        assert_eq!(dagger(&k3, &tv(&[1, 0, 1]), 0, 2).unwrap(), 3);
        assert_eq!(dagger(&k3, &tv(&[0, 0, 0]), 0, 1).unwrap(), 0);
        let star = Graph::star(3);
        assert_eq!(dagger(&star, &tv(&[1, 0, 0, 0]), 0, 1).unwrap(), 3);
    }

    #[test]
    fn betweenness_examples() {
        assert_abs_diff_eq!(betweenness(&Graph::star(3), 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(betweenness(&Graph::complete(3), 1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(betweenness(&Graph::path(3), 1), 1.0, epsilon = 1e-12);
        assert_eq!(betweenness(&Graph::path(2), 0), 0.0);
    }

    #[test]
    fn closeness_examples() {
        assert_abs_diff_eq!(closeness(&Graph::star(3), 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(closeness(&Graph::star(3), 1), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(closeness(&Graph::complete(5), 2), 1.0, epsilon = 1e-12);
        assert_eq!(closeness(&Graph::empty(3), 0), 0.0);
        // component of a path of 3 inside a larger disconnected graph
        let g = Graph::new(5, [(0, 1), (1, 2)]).unwrap();
        assert_abs_diff_eq!(closeness(&g, 0), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zscore_examples() {
        let m = ComponentMatrix {
            names: vec!["a".into(), "b".into()],
            rows: vec![vec![1.0, 7.0], vec![2.0, 7.0], vec![3.0, 7.0]],
        };
        let z = zscore_normalize(&m).unwrap();
        assert_abs_diff_eq!(z.column(0)[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.column(0)[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.column(0)[2], 1.0, epsilon = 1e-12);
        assert_eq!(z.column(1), vec![0.0; 3]);
        let again = zscore_normalize(&z).unwrap();
        for (a, b) in again.rows.iter().flatten().zip(z.rows.iter().flatten()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let single = ComponentMatrix {
            names: vec!["a".into()],
            rows: vec![vec![1.0]],
        };
        assert!(zscore_normalize(&single).is_err());
    }

    /// All-pairs shortest path counts by Floyd-Warshall style dynamic
    /// programming, used to check betweenness and closeness.
    fn floyd(g: &Graph) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
        let n = g.n();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
            for &j in g.neighbors(i) {
                row[j] = 1;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        // path counts by layering on distance
        let mut sigma = vec![vec![0.0; n]; n];
        for s in 0..n {
            let mut by_dist: Vec<usize> = (0..n).filter(|&v| d[s][v] < inf).collect();
            by_dist.sort_by_key(|&v| d[s][v]);
            sigma[s][s] = 1.0;
            for &v in &by_dist {
                if v == s {
                    continue;
                }
                sigma[s][v] = g
                    .neighbors(v)
                    .iter()
                    .filter(|&&u| d[s][u] + 1 == d[s][v])
                    .map(|&u| sigma[s][u])
                    .sum();
            }
        }
        (d, sigma)
    }

    fn oracle_betweenness(g: &Graph, v: usize) -> f64 {
        let n = g.n();
        if n < 3 {
            return 0.0;
        }
        let (d, sigma) = floyd(g);
        let inf = usize::MAX / 4;
        let mut raw = 0.0;
        for j in 0..n {
            for k in j + 1..n {
                if j == v || k == v || d[j][k] >= inf {
                    continue;
                }
                if d[j][v] + d[v][k] == d[j][k] {
                    raw += sigma[j][v] * sigma[v][k] / sigma[j][k];
                }
            }
        }
        raw * 2.0 / ((n - 1) * (n - 2)) as f64
    }

    fn oracle_closeness(g: &Graph, v: usize) -> f64 {
        let (d, _) = floyd(g);
        let inf = usize::MAX / 4;
        let reach: Vec<usize> = d[v].iter().copied().filter(|&x| x < inf).collect();
        let sum: usize = reach.iter().sum();
        if reach.len() <= 1 {
            0.0
        } else {
            (reach.len() - 1) as f64 / sum as f64
        }
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |mask| {
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
                Graph::new(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn centralities_match_floyd_warshall(g in arb_graph(12)) {
            for v in 0..g.n() {
                prop_assert!((betweenness(&g, v) - oracle_betweenness(&g, v)).abs() < 1e-9);
                prop_assert!((closeness(&g, v) - oracle_closeness(&g, v)).abs() < 1e-12);
                let b = betweenness(&g, v);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
            }
        }

        #[test]
        fn treated_counts_vanish_without_treatment(g in arb_graph(9)) {
            let t = TreatmentVector::all(g.n(), false);
            let m = compute_components(&g, &t, &Component::STANDARD[..5], CentralityScope::Neighborhood).unwrap();
            prop_assert!(m.rows.iter().flatten().all(|&x| x == 0.0));
        }

        #[test]
        fn treated_triangles_bounded_by_all_triangles(g in arb_graph(9), bits in proptest::collection::vec(any::<bool>(), 9)) {
            let t = TreatmentVector::new(bits[..g.n()].to_vec());
            let all = TreatmentVector::all(g.n(), true);
            for i in 0..g.n() {
                prop_assert!(treated_triangles(&g, &t, i) <= treated_triangles(&g, &all, i));
            }
        }
    }
}
