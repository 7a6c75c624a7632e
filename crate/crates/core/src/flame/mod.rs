//! Almost-exact matching by greedy backward elimination of matching
//! columns.
//!
//! Round 0 matches exactly on every column. Each later round tries removing
//! each remaining column, scores the reduced set by
//! `C * BF - PE_Y -/+ D * PE_G`, drops the best-scoring column and matches
//! whatever has become matchable. Matched units leave the pool.

mod network;
mod outcome;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use network::{pe_network, EdgeModel, NetworkFit};
pub use outcome::pe_outcome;

use crate::census::{binarize, census_all_units, BinScheme, Census, CensusOpts, CovariateColumn, FeatureTable};
use crate::error::{Error, Result};
use crate::graph::{Graph, TreatmentVector};

/// How the edge-model AIC enters the match quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeGSign {
    /// `MQ = C*BF - PE_Y - D*AIC`: drops that worsen the network fit are
    /// penalized.
    #[default]
    RewardFit,
    /// `MQ = C*BF - PE_Y + D*AIC`.
    Literal,
}

/// When to stop dropping columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StopRule {
    /// Keep dropping until no column is left or a pool arm is empty.
    Exhaust,
    /// Stop as soon as every treated unit in the pool is matched.
    AllTreatedMatched,
    /// Stop before a drop whose outcome prediction error exceeds the
    /// all-columns error by more than `fraction` of it.
    PeRise { fraction: f64 },
    /// Stop before a drop whose match quality falls more than `fraction`
    /// of `|MQ_0|` below the all-columns match quality.
    MqDrop { fraction: f64 },
}

/// Holdout set used to fit the outcome model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "holdout", rename_all = "kebab-case")]
pub enum Holdout {
    /// Stratified random fraction of each arm.
    Fraction { fraction: f64 },
    /// Explicit unit indices.
    Units { units: Vec<usize> },
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::PeRise { fraction: 0.0 }
    }
}

impl Default for Holdout {
    fn default() -> Self {
        Holdout::Fraction { fraction: 0.3 }
    }
}

/// Group weights in the ADE average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupWeighting {
    #[default]
    Size,
    TreatedCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Balancing-factor weight.
    pub c: f64,
    /// Network-fit weight.
    pub d: f64,
    pub ridge_penalty: f64,
    pub holdout: Holdout,
    /// Also match the holdout units instead of reserving them for the
    /// outcome model only.
    pub match_holdout: bool,
    pub seed: u64,
    pub pe_g_sign: PeGSign,
    pub stop: StopRule,
    pub weighting: GroupWeighting,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            c: 0.1,
            d: 1.0,
            ridge_penalty: 0.1,
            holdout: Holdout::default(),
            match_holdout: true,
            seed: 0,
            pe_g_sign: PeGSign::default(),
            stop: StopRule::default(),
            weighting: GroupWeighting::default(),
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.d >= 0.0) {
            return Err(Error::input("match weights C and D must be nonnegative"));
        }
        if self.ridge_penalty.is_nan() || self.ridge_penalty < 0.0 {
            return Err(Error::input("ridge penalty must be nonnegative"));
        }
        match self.stop {
            StopRule::PeRise { fraction } | StopRule::MqDrop { fraction } if fraction.is_nan() || fraction < 0.0 => {
                Err(Error::input("stop-rule fraction must be nonnegative"))
            }
            _ => Ok(()),
        }
    }
}

/// Partition of the units into the matching pool and the outcome-model
/// holdout. Both lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub matching: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Splits units by arm. The holdout keeps at least two units of each arm
/// so leave-one-out fits stay identified, and the matching side keeps at
/// least one.
pub fn split_holdout(t: &TreatmentVector, holdout: &Holdout, seed: u64) -> Result<Split> {
    let n = t.len();
    let mut in_holdout = vec![false; n];
    match holdout {
        Holdout::Fraction { fraction } => {
            if !(*fraction > 0.0 && *fraction < 1.0) {
                return Err(Error::input("holdout fraction must lie strictly between 0 and 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for arm in [true, false] {
                let mut units: Vec<usize> = (0..n).filter(|&i| t.is_treated(i) == arm).collect();
                if units.len() < 3 {
                    return Err(Error::input(format!(
                        "too few {} units to stratify the holdout",
                        if arm { "treated" } else { "control" }
                    )));
                }
                units.shuffle(&mut rng);
                let take = ((units.len() as f64 * fraction).round() as usize).clamp(2, units.len() - 1);
                for &u in &units[..take] {
                    in_holdout[u] = true;
                }
            }
        }
        Holdout::Units { units } => {
            for &u in units {
                if u >= n {
                    return Err(Error::VertexOutOfRange { vertex: u, n });
                }
                in_holdout[u] = true;
            }
            for arm in [true, false] {
                let split_has = |side: bool| (0..n).any(|i| in_holdout[i] == side && t.is_treated(i) == arm);
                if !split_has(true) || !split_has(false) {
                    return Err(Error::input("explicit holdout leaves an arm missing from one side"));
                }
            }
        }
    }
    let (holdout, matching): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_holdout[i]);
    Ok(Split { matching, holdout })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMember {
    pub unit: usize,
    pub treated: bool,
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedGroup {
    /// Active column indices at formation.
    pub columns: Vec<usize>,
    /// Shared values on those columns.
    pub signature: Vec<i64>,
    pub members: Vec<GroupMember>,
    /// Round in which the group was formed (0 = all columns).
    pub iteration: usize,
}

impl MatchedGroup {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn n_treated(&self) -> usize {
        self.members.iter().filter(|m| m.treated).count()
    }

    /// Mean treated outcome minus mean control outcome.
    pub fn difference(&self) -> f64 {
        let (mut st, mut nt, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
        for m in &self.members {
            if m.treated {
                st += m.outcome;
                nt += 1;
            } else {
                sc += m.outcome;
                nc += 1;
            }
        }
        st / nt as f64 - sc / nc as f64
    }
}

/// One committed drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub iteration: usize,
    pub dropped: String,
    pub balancing_factor: f64,
    pub pe_outcome: f64,
    pub pe_network: f64,
    pub match_quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// A pool arm ran out.
    PoolExhausted,
    /// Every column was dropped.
    ColumnsExhausted,
    /// The configured stop rule fired.
    StopRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub groups: Vec<MatchedGroup>,
    pub drop_log: Vec<DropRecord>,
    /// Pool units never matched.
    pub unmatched: Vec<usize>,
    /// Units reserved for the outcome model.
    pub holdout: Vec<usize>,
    /// Outcome and network errors with every column active.
    pub initial_pe_outcome: f64,
    pub initial_pe_network: f64,
    pub stop_reason: StopReason,
    /// `None` when no group was formed.
    pub ade: Option<f64>,
}

impl MatchResult {
    pub fn group_differences(&self) -> Vec<f64> {
        self.groups.iter().map(MatchedGroup::difference).collect()
    }

    pub fn matched_units(&self) -> usize {
        self.groups.iter().map(MatchedGroup::size).sum()
    }
}

/// Groups `pool` by signature on `active` and keeps the signatures that hold
/// both arms. Group order follows the signature order.
pub fn exact_match(
    features: &FeatureTable,
    active: &[usize],
    pool: &[usize],
    y: &[f64],
    t: &TreatmentVector,
    iteration: usize,
) -> Vec<MatchedGroup> {
    let mut by_sig: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for &u in pool {
        let row = features.row(u);
        by_sig
            .entry(active.iter().map(|&c| row[c]).collect())
            .or_default()
            .push(u);
    }
    by_sig
        .into_iter()
        .filter(|(_, units)| units.iter().any(|&u| t.is_treated(u)) && units.iter().any(|&u| !t.is_treated(u)))
        .map(|(signature, units)| MatchedGroup {
            columns: active.to_vec(),
            signature,
            members: units
                .into_iter()
                .map(|u| GroupMember {
                    unit: u,
                    treated: t.is_treated(u),
                    outcome: y[u],
                })
                .collect(),
            iteration,
        })
        .collect()
}

/// Share of the pool's treated units plus share of its control units that
/// a round matched. An empty arm contributes 0.
pub fn balancing_factor(new_treated: usize, new_control: usize, pool_treated: usize, pool_control: usize) -> f64 {
    let share = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    share(new_treated, pool_treated) + share(new_control, pool_control)
}

/// Size- or treated-count-weighted mean of group differences.
pub fn estimate_ade(groups: &[MatchedGroup], weighting: GroupWeighting) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::Undefined("no matched groups".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for g in groups {
        let w = match weighting {
            GroupWeighting::Size => g.size(),
            GroupWeighting::TreatedCount => g.n_treated(),
        } as f64;
        num += w * g.difference();
        den += w;
    }
    Ok(num / den)
}

struct Candidate {
    column: usize,
    bf: f64,
    pe_y: f64,
    pe_g: f64,
    fit: Option<NetworkFit>,
    mq: f64,
}

/// Runs the matcher. `census` supplies the raw counts behind the table's
/// subgraph columns for the network model; covariate columns take part in
/// matching and the outcome model only.
pub fn run_flame(
    features: &FeatureTable,
    y: &[f64],
    t: &TreatmentVector,
    graph: &Graph,
    census: &Census,
    config: &MatchConfig,
) -> Result<MatchResult> {
    config.validate()?;
    let n = features.n_units();
    if n == 0 {
        return Err(Error::input("feature table has no units"));
    }
    for (what, len) in [
        ("outcomes", y.len()),
        ("treatments", t.len()),
        ("graph vertices", graph.n()),
        ("census units", census.n_units()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("outcomes must be finite"));
    }
    let split = split_holdout(t, &config.holdout, config.seed)?;
    let treated: Vec<bool> = t.as_slice().to_vec();
    let all_columns: Vec<usize> = (0..features.n_columns()).collect();

    // census position of each subgraph column, for the edge model
    let census_pos: Vec<Option<usize>> = features
        .columns()
        .iter()
        .map(|c| c.code().and_then(|code| census.universe.binary_search(&code).ok()))
        .collect();
    let subgraph_cols: Vec<usize> = all_columns
        .iter()
        .copied()
        .filter(|&c| census_pos[c].is_some())
        .collect();
    let counts: Vec<Vec<f64>> = census
        .units
        .iter()
        .map(|u| {
            subgraph_cols
                .iter()
                .map(|&c| u.get(&census.universe[census_pos[c].unwrap()]) as f64)
                .collect()
        })
        .collect();
    let use_network = config.d > 0.0;
    let edge_model = if use_network {
        Some(EdgeModel::new(graph, &counts)?)
    } else {
        None
    };
    // edge-model column index of each feature column
    let model_col: Vec<Option<usize>> = all_columns
        .iter()
        .map(|c| subgraph_cols.iter().position(|s| s == c))
        .collect();
    let model_active = |active: &[usize]| -> Vec<usize> { active.iter().filter_map(|&c| model_col[c]).collect() };

    let sign = match config.pe_g_sign {
        PeGSign::RewardFit => -1.0,
        PeGSign::Literal => 1.0,
    };
    let mq = |bf: f64, pe_y: f64, pe_g: f64| config.c * bf - pe_y + sign * config.d * pe_g;

    let mut active = all_columns.clone();
    let initial_pe_y = pe_outcome(features, &split.holdout, y, &treated, &active, config.ridge_penalty)?;
    let mut fit = match &edge_model {
        Some(m) => Some(m.fit(&model_active(&active), None)?),
        None => None,
    };
    let initial_pe_g = fit.as_ref().map_or(0.0, |f| f.aic);

    let mut pool: Vec<usize> = if config.match_holdout {
        (0..n).collect()
    } else {
        split.matching.clone()
    };
    let mut groups = exact_match(features, &active, &pool, y, t, 0);
    let pool_before = (
        pool.iter().filter(|&&u| treated[u]).count(),
        pool.iter().filter(|&&u| !treated[u]).count(),
    );
    let (t0, c0) = count_arms(&groups);
    let initial_mq = mq(
        balancing_factor(t0, c0, pool_before.0, pool_before.1),
        initial_pe_y,
        initial_pe_g,
    );
    retire(&mut pool, &groups);

    let mut drop_log = Vec::new();
    let mut iteration = 1;
    let stop_reason = loop {
        let pool_t = pool.iter().filter(|&&u| treated[u]).count();
        let pool_c = pool.len() - pool_t;
        if pool_t == 0 || pool_c == 0 {
            break StopReason::PoolExhausted;
        }
        if active.is_empty() {
            break StopReason::ColumnsExhausted;
        }
        let warm = fit.as_ref().map(|f| f.coefficients.clone());
        let candidates = active
            .par_iter()
            .map(|&col| -> Result<Candidate> {
                let reduced: Vec<usize> = active.iter().copied().filter(|&c| c != col).collect();
                let tentative = exact_match(features, &reduced, &pool, y, t, iteration);
                let (nt, nc) = count_arms(&tentative);
                let bf = balancing_factor(nt, nc, pool_t, pool_c);
                let pe_y = pe_outcome(features, &split.holdout, y, &treated, &reduced, config.ridge_penalty)?;
                let fit = match &edge_model {
                    Some(m) => {
                        let current = model_active(&active);
                        let warm_start = warm.as_ref().map(|w| {
                            let mut out = vec![w[0]];
                            out.extend(
                                current
                                    .iter()
                                    .zip(&w[1..])
                                    .filter(|(&mc, _)| Some(mc) != model_col[col])
                                    .map(|(_, &b)| b),
                            );
                            out
                        });
                        Some(m.fit(&model_active(&reduced), warm_start.as_deref())?)
                    }
                    None => None,
                };
                let pe_g = fit.as_ref().map_or(0.0, |f| f.aic);
                Ok(Candidate {
                    column: col,
                    bf,
                    pe_y,
                    pe_g,
                    fit,
                    mq: mq(bf, pe_y, pe_g),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let best = candidates
            .into_iter()
            .reduce(|a, b| {
                let better = b.mq > a.mq
                    || (b.mq == a.mq && features.columns()[b.column].name < features.columns()[a.column].name);
                if better {
                    b
                } else {
                    a
                }
            })
            .expect("active set is nonempty");

        let halt = match config.stop {
            StopRule::Exhaust => false,
            StopRule::AllTreatedMatched => false,
            StopRule::PeRise { fraction } => best.pe_y > initial_pe_y + fraction * initial_pe_y.abs(),
            StopRule::MqDrop { fraction } => best.mq < initial_mq - fraction * initial_mq.abs(),
        };
        if halt {
            break StopReason::StopRule;
        }

        active.retain(|&c| c != best.column);
        let new_groups = exact_match(features, &active, &pool, y, t, iteration);
        retire(&mut pool, &new_groups);
        groups.extend(new_groups);
        drop_log.push(DropRecord {
            iteration,
            dropped: features.columns()[best.column].name.clone(),
            balancing_factor: best.bf,
            pe_outcome: best.pe_y,
            pe_network: best.pe_g,
            match_quality: best.mq,
        });
        fit = best.fit;
        iteration += 1;
        if config.stop == StopRule::AllTreatedMatched && !pool.iter().any(|&u| treated[u]) {
            break StopReason::StopRule;
        }
    };

    let unmatched = pool;
    let ade = estimate_ade(&groups, config.weighting).ok();
    if ade.is_none() {
        log::warn!("no treated unit was matched; the direct-effect estimate is undefined");
    }
    Ok(MatchResult {
        groups,
        drop_log,
        unmatched,
        holdout: if config.match_holdout {
            Vec::new()
        } else {
            split.holdout
        },
        initial_pe_outcome: initial_pe_y,
        initial_pe_network: initial_pe_g,
        stop_reason,
        ade,
    })
}

fn count_arms(groups: &[MatchedGroup]) -> (usize, usize) {
    groups.iter().fold((0, 0), |(a, b), g| {
        let t = g.n_treated();
        (a + t, b + g.size() - t)
    })
}

fn retire(pool: &mut Vec<usize>, groups: &[MatchedGroup]) {
    let matched: std::collections::HashSet<usize> =
        groups.iter().flat_map(|g| g.members.iter().map(|m| m.unit)).collect();
    pool.retain(|u| !matched.contains(u));
}

/// Everything produced by matching one observed dataset.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub census: Census,
    pub features: FeatureTable,
    pub result: MatchResult,
}

/// Census of every unit, feature table and matcher in one call.
#[allow(clippy::too_many_arguments)]
pub fn match_on_graph(
    graph: &Graph,
    t: &TreatmentVector,
    y: &[f64],
    unit_ids: &[String],
    covariates: &[CovariateColumn],
    census_opts: CensusOpts,
    bins: BinScheme,
    config: &MatchConfig,
) -> Result<Pipeline> {
    let census = census_all_units(graph, t, census_opts)?;
    let features = binarize(&census, unit_ids, bins, covariates)?;
    let result = run_flame(&features, y, t, graph, &census, config)?;
    Ok(Pipeline {
        census,
        features,
        result,
    })
}
