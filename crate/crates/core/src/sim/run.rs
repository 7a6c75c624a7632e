//! Replicated experiments and their summaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{nearest_control, run_baselines, Baseline, EigenMetric, EigenMode, EigenSpectrum, Pairing};
use crate::census::CovariateColumn;
use crate::error::{Error, Result};
use crate::flame::match_on_graph;
use crate::graph::{Graph, TreatmentVector};

use super::config::{GraphSpec, Method, SimConfig};
use super::distance::{group_match_quality, nearest_match_quality, NeighborhoodDistances};
use super::generate::{gen_er, gen_sbm, randomize};
use super::outcome::gen_outcomes;

/// One estimator's result in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub estimate: Option<f64>,
    pub abs_error: Option<f64>,
    /// Mean graph distance between matched neighborhoods.
    pub graph_distance: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub setting: String,
    pub replication: usize,
    pub seed: u64,
    pub true_ade: f64,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    pub mean_abs_error: Option<f64>,
    pub median_abs_error: Option<f64>,
    pub q25_abs_error: Option<f64>,
    pub q75_abs_error: Option<f64>,
    pub mean_graph_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SimConfig,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<ReplicationRecord>,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Per-method error summaries over the replications.
pub fn summarize(methods: &[Method], records: &[ReplicationRecord]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&method| {
            let outcomes: Vec<&MethodOutcome> = records
                .iter()
                .flat_map(|r| r.outcomes.iter().filter(move |o| o.method == method))
                .collect();
            let mut errors: Vec<f64> = outcomes.iter().filter_map(|o| o.abs_error).collect();
            errors.sort_by(f64::total_cmp);
            let distances: Vec<f64> = outcomes.iter().filter_map(|o| o.graph_distance).collect();
            MethodSummary {
                method,
                successes: errors.len(),
                failures: outcomes.len() - errors.len(),
                mean_abs_error: mean(&errors),
                median_abs_error: quantile(&errors, 0.5),
                q25_abs_error: quantile(&errors, 0.25),
                q75_abs_error: quantile(&errors, 0.75),
                mean_graph_distance: mean(&distances),
            }
        })
        .collect()
}

/// Pairs each treated unit with the control whose interference value is
/// closest and averages the outcome differences.
pub fn match_on_true_f(f: &[f64], y: &[f64], t: &TreatmentVector) -> Result<Pairing> {
    if f.len() != t.len() || y.len() != t.len() {
        return Err(Error::LengthMismatch {
            what: "interference values, outcomes and treatments",
            expected: t.len(),
            actual: if f.len() != t.len() { f.len() } else { y.len() },
        });
    }
    nearest_control(y, t, |i, j| (f[i] - f[j]).abs())
}

/// Residuals of an OLS fit of `y` on the one-hot levels of `x` plus an
/// intercept, i.e. `y` minus its level mean.
pub fn residualize_on_levels(y: &[f64], x: &[i64]) -> Vec<f64> {
    let mut sums = std::collections::BTreeMap::<i64, (f64, usize)>::new();
    for (&v, &level) in y.iter().zip(x) {
        let e = sums.entry(level).or_default();
        e.0 += v;
        e.1 += 1;
    }
    y.iter()
        .zip(x)
        .map(|(&v, level)| {
            let (s, c) = sums[level];
            v - s / c as f64
        })
        .collect()
}

fn draw_graph(spec: &GraphSpec, rng: &mut ChaCha8Rng) -> Result<Graph> {
    match spec {
        GraphSpec::Er { n, q } => gen_er(*n, *q, rng),
        GraphSpec::Sbm {
            sizes,
            p_within,
            p_between,
        } => gen_sbm(sizes, *p_within, *p_between, rng),
        GraphSpec::EdgeList { path } => Ok(crate::io::load_edge_list(path)?.graph),
    }
}

/// Graph shared by every replication, if the configuration fixes one.
fn shared_graph(config: &SimConfig) -> Result<Option<Graph>> {
    match &config.graph {
        GraphSpec::EdgeList { .. } => draw_graph(&config.graph, &mut ChaCha8Rng::seed_from_u64(config.seed)).map(Some),
        spec if config.fixed_graph => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(1);
            draw_graph(spec, &mut rng).map(Some)
        }
        _ => Ok(None),
    }
}

fn scored(method: Method, truth: f64, result: Result<(f64, Option<f64>)>) -> MethodOutcome {
    match result {
        Ok((estimate, graph_distance)) => MethodOutcome {
            method,
            estimate: Some(estimate),
            abs_error: Some((estimate - truth).abs()),
            graph_distance,
            failure: None,
        },
        Err(e) => MethodOutcome {
            method,
            estimate: None,
            abs_error: None,
            graph_distance: None,
            failure: Some(e.to_string()),
        },
    }
}

/// Runs one replication; every estimator failure is recorded in place.
pub fn replicate(config: &SimConfig, shared: Option<&Graph>, replication: usize) -> ReplicationRecord {
    let seed = config.seed.wrapping_add(replication as u64);
    let mut record = ReplicationRecord {
        setting: config.name.clone(),
        replication,
        seed,
        true_ade: f64::NAN,
        outcomes: Vec::new(),
    };
    if let Err(e) = fill_replication(config, shared, seed, &mut record) {
        record.outcomes = config
            .methods
            .iter()
            .map(|&m| scored(m, f64::NAN, Err(Error::Numerical(format!("replication failed: {e}")))))
            .collect();
    }
    record
}

fn fill_replication(
    config: &SimConfig,
    shared: Option<&Graph>,
    seed: u64,
    record: &mut ReplicationRecord,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn;
    let g = match shared {
        Some(g) => g,
        None => {
            drawn = draw_graph(&config.graph, &mut rng)?;
            &drawn
        }
    };
    let t = randomize(g.n(), &config.design, &mut rng)?;
    let out = gen_outcomes(&config.outcome, g, &t, &mut rng)?;
    record.true_ade = out.true_ade;
    let truth = out.true_ade;

    let distances = if config.match_quality {
        Some(NeighborhoodDistances::new(g, &t)?)
    } else {
        None
    };
    // baselines see outcomes net of the covariate, matching sees it directly
    let y_adjusted = match &out.covariate {
        Some(x) => residualize_on_levels(&out.y, x),
        None => out.y.clone(),
    };

    for &method in &config.methods {
        let result = match method {
            Method::Flame => {
                let ids: Vec<String> = (0..g.n()).map(|i| i.to_string()).collect();
                let covariates: Vec<CovariateColumn> = out
                    .covariate
                    .iter()
                    .map(|x| CovariateColumn {
                        name: "x".into(),
                        values: x.clone(),
                    })
                    .collect();
                let mut matching = config.matching.clone();
                matching.seed = seed;
                match_on_graph(g, &t, &out.y, &ids, &covariates, config.census, config.bins, &matching).and_then(|p| {
                    let ade = p
                        .result
                        .ade
                        .ok_or_else(|| Error::Undefined("no matched groups".into()))?;
                    let quality = match &distances {
                        Some(d) => Some(group_match_quality(&p.result.groups, d)?),
                        None => None,
                    };
                    Ok((ade, quality))
                })
            }
            Method::TrueInterference => match_on_true_f(&out.interference, &y_adjusted, &t).and_then(|p| {
                let quality = match &distances {
                    Some(d) => Some(nearest_match_quality(&t, d, |i, j| {
                        (out.interference[i] - out.interference[j]).abs()
                    })?),
                    None => None,
                };
                Ok((p.estimate, quality))
            }),
            other => {
                let baseline = other.baseline().expect("baseline method");
                let (_, res) = run_baselines(&[baseline], g, &y_adjusted, &t, &config.baselines)
                    .pop()
                    .expect("one result");
                res.and_then(|est| {
                    let quality = match (&distances, baseline) {
                        (Some(d), Baseline::FirstEigenvector | Baseline::AllEigenvectors) => {
                            let spectrum = EigenSpectrum::of_graph(g)?;
                            let mode = if baseline == Baseline::FirstEigenvector {
                                EigenMode::First
                            } else {
                                EigenMode::All
                            };
                            let metric = EigenMetric::new(&spectrum, mode, config.baselines.standardize_eigen);
                            Some(nearest_match_quality(&t, d, |i, j| metric.distance(i, j))?)
                        }
                        _ => None,
                    };
                    Ok((est.estimate, quality))
                })
            }
        };
        record.outcomes.push(scored(method, truth, result));
    }
    Ok(())
}

/// Runs every replication in parallel and summarizes the errors. Output is
/// independent of the thread count.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let shared = shared_graph(config)?;
    let records: Vec<ReplicationRecord> = (0..config.replications)
        .into_par_iter()
        .map(|r| replicate(config, shared.as_ref(), r))
        .collect();
    for r in &records {
        for o in &r.outcomes {
            if let Some(msg) = &o.failure {
                log::debug!(
                    "{} replication {}: {} failed: {msg}",
                    r.setting,
                    r.replication,
                    o.method
                );
            }
        }
    }
    Ok(ExperimentReport {
        config: config.clone(),
        summaries: summarize(&config.methods, &records),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{Interference, Noise, OutcomeModel};
    use crate::sim::generate::Design;
    use approx::assert_abs_diff_eq;

    fn small_config() -> SimConfig {
        SimConfig {
            name: "small".into(),
            graph: GraphSpec::Er { n: 30, q: 0.08 },
            fixed_graph: false,
            design: Design::Complete { treated: 15 },
            outcome: OutcomeModel {
                interference: Interference::Additive {
                    weights: vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                    zscore: true,
                },
                ..OutcomeModel::default()
            },
            methods: Method::STANDARD.to_vec(),
            replications: 3,
            seed: 11,
            census: Default::default(),
            bins: Default::default(),
            matching: Default::default(),
            baselines: Default::default(),
            match_quality: false,
        }
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), Some(2.5));
        assert_eq!(quantile(&xs, 0.25), Some(1.75));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn residualizing_removes_level_means() {
        let r = residualize_on_levels(&[1.0, 3.0, 10.0, 14.0], &[1, 1, 2, 2]);
        assert_eq!(r, vec![-1.0, 1.0, -2.0, 2.0]);
    }

    #[test]
    fn true_f_matching() {
        let t = TreatmentVector::from_indicators(&[1, 0, 1, 0]).unwrap();
        let y = [5.0, 1.0, 9.0, 2.0];
        // separated clusters pair within cluster
        let p = match_on_true_f(&[0.0, 0.1, 10.0, 10.2], &y, &t).unwrap();
        assert_eq!(p.pairs, vec![(0, 1), (2, 3)]);
        // constant f ties to the first control
        let p = match_on_true_f(&[1.0; 4], &y, &t).unwrap();
        assert_eq!(p.pairs, vec![(0, 1), (2, 1)]);
        let all_treated = TreatmentVector::all(4, true);
        assert!(match_on_true_f(&[0.0; 4], &y, &all_treated).is_err());
    }

    #[test]
    fn noiseless_no_interference_is_exact() {
        let mut config = small_config();
        config.outcome = OutcomeModel {
            noise: Noise::Homoskedastic { sd: 0.0 },
            tau_sd: 0.0,
            ..OutcomeModel::default()
        };
        config.methods.retain(|m| *m != Method::Sania);
        let report = run_experiment(&config).unwrap();
        for s in &report.summaries {
            assert_eq!(s.failures, 0, "{:?}", s.method);
            assert_abs_diff_eq!(s.mean_abs_error.unwrap(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let config = small_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 3);
        assert_eq!(a.records[1].seed, 12);
        // a replication does not depend on how many others run
        let mut one = config.clone();
        one.replications = 1;
        assert_eq!(run_experiment(&one).unwrap().records[0], a.records[0]);
    }

    #[test]
    fn fixed_graph_is_shared() {
        let mut config = small_config();
        config.fixed_graph = true;
        let g1 = shared_graph(&config).unwrap().unwrap();
        let g2 = shared_graph(&config).unwrap().unwrap();
        assert_eq!(g1, g2);
        config.fixed_graph = false;
        assert!(shared_graph(&config).unwrap().is_none());
    }

    #[test]
    fn match_quality_is_reported() {
        let mut config = small_config();
        config.match_quality = true;
        config.methods = vec![
            Method::Flame,
            Method::AllEigenvectors,
            Method::TrueInterference,
            Method::Naive,
        ];
        let report = run_experiment(&config).unwrap();
        for m in [Method::Flame, Method::AllEigenvectors, Method::TrueInterference] {
            assert!(report.summary(m).unwrap().mean_graph_distance.is_some(), "{m}");
        }
        assert!(report.summary(Method::Naive).unwrap().mean_graph_distance.is_none());
    }
}
