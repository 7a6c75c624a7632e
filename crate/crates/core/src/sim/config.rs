//! Simulation configuration, serialized as JSON.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::baselines::{Baseline, BaselineOpts};
use crate::census::{BinScheme, CensusOpts};
use crate::error::{Error, Result};
use crate::flame::MatchConfig;
use crate::interference::{CentralityScope, Component};

use super::generate::Design;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GraphSpec {
    Er {
        n: usize,
        q: f64,
    },
    Sbm {
        sizes: Vec<usize>,
        p_within: f64,
        p_between: f64,
    },
    /// A `src,dst` CSV edge list read once.
    EdgeList {
        path: PathBuf,
    },
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

/// The interference function `f` added to each unit's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Interference {
    None,
    /// Weighted sum of the seven standard components.
    Additive {
        weights: Vec<f64>,
        #[serde(default = "yes")]
        zscore: bool,
    },
    /// `scale` times the product of the listed components.
    Multiplicative {
        components: Vec<Component>,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        zscore: bool,
    },
    /// `(5 - gamma) * degree + gamma * triangles` measured after deleting
    /// every control-control edge.
    Misspecified {
        gamma: f64,
        #[serde(default = "yes")]
        zscore: bool,
    },
}

/// A discrete unit covariate entering the outcome linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateTerm {
    pub beta: f64,
    /// Values drawn uniformly.
    pub levels: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Noise {
    Homoskedastic {
        sd: f64,
    },
    /// Unit variances drawn from `U(0, 1)`.
    Heteroskedastic,
}

/// What the estimates are scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdeTarget {
    /// Sample mean of the drawn unit effects.
    #[default]
    Realized,
    /// The prior mean of the unit effects.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutcomeModel {
    pub interference: Interference,
    pub covariate: Option<CovariateTerm>,
    pub noise: Noise,
    pub tau_mean: f64,
    pub tau_sd: f64,
    pub target: AdeTarget,
    pub centrality: CentralityScope,
}

impl Default for OutcomeModel {
    fn default() -> Self {
        Self {
            interference: Interference::None,
            covariate: None,
            noise: Noise::Homoskedastic { sd: 1.0 },
            tau_mean: 5.0,
            tau_sd: 1.0,
            target: AdeTarget::Realized,
            centrality: CentralityScope::default(),
        }
    }
}

/// An estimator scored by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Flame,
    Naive,
    FirstEigenvector,
    AllEigenvectors,
    Stratified,
    Sania,
    /// Nearest-control matching on the true interference values.
    TrueInterference,
}

impl Method {
    pub const STANDARD: [Method; 6] = [
        Method::Flame,
        Method::Naive,
        Method::FirstEigenvector,
        Method::AllEigenvectors,
        Method::Stratified,
        Method::Sania,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Flame => "flame",
            Method::TrueInterference => "true-interference",
            other => other.baseline().expect("baseline").name(),
        }
    }

    pub fn baseline(&self) -> Option<Baseline> {
        match self {
            Method::Naive => Some(Baseline::Naive),
            Method::FirstEigenvector => Some(Baseline::FirstEigenvector),
            Method::AllEigenvectors => Some(Baseline::AllEigenvectors),
            Method::Stratified => Some(Baseline::Stratified),
            Method::Sania => Some(Baseline::Sania),
            Method::Flame | Method::TrueInterference => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One simulated setting: a graph model, an assignment design, an outcome
/// model, the estimators and the replication plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub name: String,
    pub graph: GraphSpec,
    /// Draw one graph from `seed` and reuse it in every replication.
    #[serde(default)]
    pub fixed_graph: bool,
    pub design: Design,
    #[serde(default)]
    pub outcome: OutcomeModel,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub census: CensusOpts,
    #[serde(default)]
    pub bins: BinScheme,
    #[serde(default)]
    pub matching: MatchConfig,
    #[serde(default)]
    pub baselines: BaselineOpts,
    /// Also score each matcher by the graph distance between matched
    /// neighborhoods.
    #[serde(default)]
    pub match_quality: bool,
}

fn default_methods() -> Vec<Method> {
    Method::STANDARD.to_vec()
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::input(format!("{what} must lie in [0, 1], got {p}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::input("at least one replication is required"));
        }
        if self.methods.is_empty() {
            return Err(Error::input("no estimators selected"));
        }
        match &self.graph {
            GraphSpec::Er { q, .. } => check_probability(*q, "edge probability")?,
            GraphSpec::Sbm {
                p_within, p_between, ..
            } => {
                check_probability(*p_within, "within-block probability")?;
                check_probability(*p_between, "between-block probability")?;
            }
            GraphSpec::EdgeList { .. } => {}
        }
        if let Some(n) = self.graph_size() {
            match &self.design {
                Design::Complete { treated } if *treated > n => {
                    return Err(Error::input(format!("cannot treat {treated} of {n} units")))
                }
                Design::PerBlock { sizes, .. } if sizes.iter().sum::<usize>() != n => {
                    return Err(Error::input("block sizes do not add up to the number of units"))
                }
                _ => {}
            }
        }
        if let Design::Bernoulli { p } = self.design {
            check_probability(p, "treatment probability")?;
        }
        match &self.outcome.interference {
            Interference::Additive { weights, .. } if weights.len() != 7 => {
                return Err(Error::LengthMismatch {
                    what: "additive interference weights",
                    expected: 7,
                    actual: weights.len(),
                })
            }
            Interference::Multiplicative { components, .. } if components.is_empty() => {
                return Err(Error::input("multiplicative interference needs at least one component"))
            }
            _ => {}
        }
        if let Some(cov) = &self.outcome.covariate {
            if cov.levels.is_empty() {
                return Err(Error::input("covariate needs at least one level"));
            }
        }
        if let Noise::Homoskedastic { sd } = self.outcome.noise {
            if sd.is_nan() || sd < 0.0 {
                return Err(Error::input("noise sd must be nonnegative"));
            }
        }
        if self.outcome.tau_sd.is_nan() || self.outcome.tau_sd < 0.0 {
            return Err(Error::input("effect sd must be nonnegative"));
        }
        self.matching.validate()
    }

    fn graph_size(&self) -> Option<usize> {
        match &self.graph {
            GraphSpec::Er { n, .. } => Some(*n),
            GraphSpec::Sbm { sizes, .. } => Some(sizes.iter().sum()),
            GraphSpec::EdgeList { .. } => None,
        }
    }
}
