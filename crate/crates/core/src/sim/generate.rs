//! Random graphs and treatment assignments.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, TreatmentVector};

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::input(format!("{what} must lie in [0, 1], got {p}")))
    }
}

/// Erdos-Renyi graph: each unordered pair independently with probability `q`.
pub fn gen_er<R: Rng + ?Sized>(n: usize, q: f64, rng: &mut R) -> Result<Graph> {
    check_probability(q, "edge probability")?;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(q) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges)
}

/// Stochastic block model with consecutive blocks of the given sizes.
pub fn gen_sbm<R: Rng + ?Sized>(sizes: &[usize], p_within: f64, p_between: f64, rng: &mut R) -> Result<Graph> {
    check_probability(p_within, "within-block probability")?;
    check_probability(p_between, "between-block probability")?;
    let block: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = block.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { p_within } else { p_between };
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges)
}

/// Treatment assignment mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "kebab-case")]
pub enum Design {
    /// Uniformly random subset of exactly `treated` units.
    Complete { treated: usize },
    /// Complete randomization inside each consecutive block.
    PerBlock {
        sizes: Vec<usize>,
        treated_per_block: usize,
    },
    /// Independent coin flips.
    Bernoulli { p: f64 },
}

pub fn randomize<R: Rng + ?Sized>(n: usize, design: &Design, rng: &mut R) -> Result<TreatmentVector> {
    let mut bits = vec![false; n];
    match design {
        Design::Complete { treated } => {
            if *treated > n {
                return Err(Error::input(format!("cannot treat {treated} of {n} units")));
            }
            for i in sample(rng, n, *treated) {
                bits[i] = true;
            }
        }
        Design::PerBlock {
            sizes,
            treated_per_block,
        } => {
            if sizes.iter().sum::<usize>() != n {
                return Err(Error::input("block sizes do not add up to the number of units"));
            }
            let mut start = 0;
            for &s in sizes {
                if *treated_per_block > s {
                    return Err(Error::input(format!(
                        "cannot treat {treated_per_block} of a block of {s}"
                    )));
                }
                for i in sample(rng, s, *treated_per_block) {
                    bits[start + i] = true;
                }
                start += s;
            }
        }
        Design::Bernoulli { p } => {
            check_probability(*p, "treatment probability")?;
            for b in bits.iter_mut() {
                *b = rng.random_bool(*p);
            }
        }
    }
    Ok(TreatmentVector::new(bits))
}
