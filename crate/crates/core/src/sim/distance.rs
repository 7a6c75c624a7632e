//! Graph distance between neighborhoods and the match-quality audit.

use crate::error::{Error, Result};
use crate::flame::MatchedGroup;
use crate::graph::{labeled_neighborhood, Graph, LabeledGraph, NeighborhoodOpts, TreatmentVector};

/// Largest graph handled by exhaustive search.
pub const EXACT_LIMIT: usize = 8;

/// Dense adjacency padded to `size` vertices.
fn padded(h: &LabeledGraph, size: usize) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; size]; size];
    for (u, v) in h.graph.edges() {
        a[u][v] = true;
        a[v][u] = true;
    }
    a
}

/// Number of unordered pairs whose adjacency differs under `perm`.
fn mismatches(a: &[Vec<bool>], b: &[Vec<bool>], perm: &[usize]) -> usize {
    let m = a.len();
    let mut count = 0;
    for i in 0..m {
        for j in i + 1..m {
            if a[i][j] != b[perm[i]][perm[j]] {
                count += 1;
            }
        }
    }
    count
}

struct Search<'a> {
    a: &'a [Vec<bool>],
    b: &'a [Vec<bool>],
    perm: Vec<usize>,
    used: Vec<bool>,
    best: usize,
}

impl Search<'_> {
    fn extend(&mut self, depth: usize, cost: usize) {
        if cost >= self.best {
            return;
        }
        let m = self.a.len();
        if depth == m {
            self.best = cost;
            return;
        }
        for cand in 0..m {
            if self.used[cand] {
                continue;
            }
            let added = (0..depth)
                .filter(|&k| self.a[depth][k] != self.b[cand][self.perm[k]])
                .count();
            self.used[cand] = true;
            self.perm.push(cand);
            self.extend(depth + 1, cost + added);
            self.perm.pop();
            self.used[cand] = false;
            if self.best == 0 {
                return;
            }
        }
    }
}

fn exact_mismatches(a: &[Vec<bool>], b: &[Vec<bool>]) -> usize {
    let m = a.len();
    let mut search = Search {
        a,
        b,
        perm: Vec::with_capacity(m),
        used: vec![false; m],
        best: m * m.saturating_sub(1) / 2 + 1,
    };
    search.extend(0, 0);
    search.best
}

fn degree_order(a: &[Vec<bool>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(a[v].iter().filter(|&&x| x).count()), v));
    order
}

fn heuristic_mismatches(a: &[Vec<bool>], b: &[Vec<bool>]) -> usize {
    let m = a.len();
    let (oa, ob) = (degree_order(a), degree_order(b));
    let mut perm = vec![0; m];
    for (&u, &v) in oa.iter().zip(&ob) {
        perm[u] = v;
    }
    let mut cost = mismatches(a, b, &perm);
    loop {
        let mut improved = false;
        for i in 0..m {
            for j in i + 1..m {
                perm.swap(i, j);
                let c = mismatches(a, b, &perm);
                if c < cost {
                    cost = c;
                    improved = true;
                } else {
                    perm.swap(i, j);
                }
            }
        }
        if !improved {
            return cost;
        }
    }
}

/// Minimal Frobenius norm of the adjacency difference over vertex
/// reorderings, padding the smaller graph with isolated vertices. Labels are
/// ignored. Exact when both graphs have at most [`EXACT_LIMIT`] vertices,
/// otherwise an upper bound from degree alignment and pairwise swaps.
pub fn graph_distance(g1: &LabeledGraph, g2: &LabeledGraph) -> f64 {
    let size = g1.n().max(g2.n());
    let (a, b) = (padded(g1, size), padded(g2, size));
    let count = if size <= EXACT_LIMIT {
        exact_mismatches(&a, &b)
    } else {
        heuristic_mismatches(&a, &b)
    };
    ((2 * count) as f64).sqrt()
}

/// The heuristic alone, for auditing it against the exact search.
pub fn graph_distance_heuristic(g1: &LabeledGraph, g2: &LabeledGraph) -> f64 {
    let size = g1.n().max(g2.n());
    ((2 * heuristic_mismatches(&padded(g1, size), &padded(g2, size))) as f64).sqrt()
}

/// Caches unit neighborhoods and pairwise distances.
pub struct NeighborhoodDistances {
    hoods: Vec<LabeledGraph>,
}

impl NeighborhoodDistances {
    pub fn new(g: &Graph, t: &TreatmentVector) -> Result<Self> {
        let hoods = (0..g.n())
            .map(|i| labeled_neighborhood(g, t, i, NeighborhoodOpts::default()))
            .collect::<Result<_>>()?;
        Ok(Self { hoods })
    }

    pub fn between(&self, i: usize, j: usize) -> f64 {
        graph_distance(&self.hoods[i], &self.hoods[j])
    }
}

/// Mean over matched units of the smallest distance to an opposite-arm
/// member of the unit's group.
pub fn group_match_quality(groups: &[MatchedGroup], dist: &NeighborhoodDistances) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for group in groups {
        for a in &group.members {
            let best = group
                .members
                .iter()
                .filter(|b| b.treated != a.treated)
                .map(|b| dist.between(a.unit, b.unit))
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                total += best;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Undefined("no matched units to audit".into()));
    }
    Ok(total / count as f64)
}

/// Mean over all units of the distance to the nearest opposite-arm unit
/// under `metric` (ties to the smallest index).
pub fn nearest_match_quality(
    t: &TreatmentVector,
    dist: &NeighborhoodDistances,
    metric: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    let n = t.len();
    if t.n_treated() == 0 || t.n_treated() == n {
        return Err(Error::input("both arms must be nonempty"));
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| t.is_treated(j) != t.is_treated(i)) {
            let d = metric(i, j);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("opposite arm nonempty");
        total += dist.between(i, j);
    }
    Ok(total / n as f64)
}
