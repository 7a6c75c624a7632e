//! Nearest-census matching across independently drawn graphs.
//!
//! A target graph holds one treated unit of interest. Each candidate graph
//! is drawn independently with the same model and treatment design and
//! offers its unit 0 as a candidate when that unit is a control. The target
//! is matched to the candidate minimizing the Hamming distance between
//! labeled neighborhood censuses, earliest candidate on ties. Candidate
//! pools are nested, so a larger pool can only find an equal or closer
//! census.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::census::{enumerate_connected_subgraphs, CensusVector};
use crate::error::{Error, Result};
use crate::graph::{labeled_neighborhood, NeighborhoodOpts, TreatmentVector};

use super::generate::{gen_er, randomize, Design};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    /// Vertices per graph.
    pub graph_size: usize,
    pub edge_probability: f64,
    /// Treated units per graph.
    pub treated: usize,
    /// Pool sizes to compare, ascending.
    pub pool_sizes: Vec<usize>,
    pub replications: usize,
    pub max_motif_size: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        Self {
            graph_size: 8,
            edge_probability: 0.3,
            treated: 4,
            pool_sizes: vec![10, 50, 250],
            replications: 200,
            max_motif_size: 5,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePoint {
    pub pool_size: usize,
    pub mean_abs_error: f64,
    pub mean_census_distance: f64,
    /// Share of replications whose match has an identical census.
    pub exact_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub points: Vec<RegimePoint>,
    /// Replications used (those with a control candidate in the smallest pool).
    pub used: usize,
}

impl RegimeReport {
    pub fn is_non_increasing(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].mean_abs_error <= w[0].mean_abs_error)
    }
}

/// Error and census distance of the best match at each pool size.
type PoolResults = Vec<(f64, usize)>;

struct Unit {
    census: CensusVector,
    f: f64,
    noise: f64,
}

/// Interference of a unit: treated neighbors plus neighborhood edges with a
/// treated endpoint. Both are functions of the labeled neighborhood census.
fn interference(census: &CensusVector) -> f64 {
    census
        .iter()
        .filter(|(code, _)| code.size() <= 2 && code.edge_count() + 1 == code.size() && code.treated_count() > 0)
        .map(|(_, &c)| c as f64)
        .sum()
}

fn census_distance(a: &CensusVector, b: &CensusVector) -> usize {
    let mut codes: Vec<_> = a.codes().chain(b.codes()).copied().collect();
    codes.sort();
    codes.dedup();
    codes.iter().filter(|c| a.get(c) != b.get(c)).count()
}

fn draw_unit(config: &RegimeConfig, rng: &mut ChaCha8Rng, force_treated: bool) -> Result<(bool, Unit)> {
    let g = gen_er(config.graph_size, config.edge_probability, rng)?;
    let mut t = randomize(
        config.graph_size,
        &Design::Complete {
            treated: config.treated,
        },
        rng,
    )?;
    if force_treated && !t.is_treated(0) {
        // swap unit 0 with a treated unit; the design stays complete
        let mut bits = t.as_slice().to_vec();
        let other = bits.iter().position(|&b| b).expect("a treated unit");
        bits.swap(0, other);
        t = TreatmentVector::new(bits);
    }
    let h = labeled_neighborhood(&g, &t, 0, NeighborhoodOpts::default())?;
    let census = enumerate_connected_subgraphs(&h, config.max_motif_size);
    let f = interference(&census);
    let noise = config.noise_sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    Ok((t.is_treated(0), Unit { census, f, noise }))
}

/// Runs the nested-pool simulation.
pub fn run_regime(config: &RegimeConfig) -> Result<RegimeReport> {
    if config.pool_sizes.is_empty() || config.pool_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("pool sizes must be nonempty and strictly increasing"));
    }
    if config.treated == 0 || config.treated >= config.graph_size {
        return Err(Error::input("each graph needs both arms"));
    }
    if config.replications == 0 {
        return Err(Error::input("at least one replication is required"));
    }
    let largest = *config.pool_sizes.last().expect("nonempty");
    let per_rep: Vec<Result<Option<PoolResults>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
            let (_, target) = draw_unit(config, &mut rng, true)?;
            let mut best: Option<(usize, f64)> = None;
            let mut results = Vec::with_capacity(config.pool_sizes.len());
            let mut next = 0;
            for k in 0..largest {
                let (treated, cand) = draw_unit(config, &mut rng, false)?;
                if !treated {
                    let d = census_distance(&target.census, &cand.census);
                    if best.is_none_or(|(b, _)| d < b) {
                        let err = (target.f - cand.f + target.noise - cand.noise).abs();
                        best = Some((d, err));
                    }
                }
                if k + 1 == config.pool_sizes[next] {
                    match best {
                        Some((d, err)) => results.push((err, d)),
                        None => return Ok(None),
                    }
                    next += 1;
                }
            }
            Ok(Some(results))
        })
        .collect();
    let mut sums = vec![(0.0, 0.0, 0usize); config.pool_sizes.len()];
    let mut used = 0;
    for rep in per_rep {
        if let Some(results) = rep? {
            used += 1;
            for (s, (err, d)) in sums.iter_mut().zip(results) {
                s.0 += err;
                s.1 += d as f64;
                s.2 += usize::from(d == 0);
            }
        }
    }
    if used == 0 {
        return Err(Error::Undefined("no replication found a control candidate".into()));
    }
    let points = config
        .pool_sizes
        .iter()
        .zip(sums)
        .map(|(&pool_size, (e, d, exact))| RegimePoint {
            pool_size,
            mean_abs_error: e / used as f64,
            mean_census_distance: d / used as f64,
            exact_share: exact as f64 / used as f64,
        })
        .collect();
    Ok(RegimeReport { points, used })
}
