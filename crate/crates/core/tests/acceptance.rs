//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! successfully unless `NETMATCH_ACCEPTANCE_STRICT` is set, in which case any
//! failure makes the process exit with status 1.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netmatch::baselines::{sania_estimate, sania_weight, sania_weights, SaniaFormula};
use netmatch::census::{
    census_all_units, enumerate_connected_subgraphs, BinScheme, CanonicalCode, Canonicalizer, CensusOpts,
    CovariateColumn,
};
use netmatch::flame::{match_on_graph, MatchConfig};
use netmatch::graph::{Graph, LabeledGraph, TreatmentVector};
use netmatch::sim::{
    self, gen_er, gen_outcomes, randomize, run_experiment, run_regime, Design, ExperimentReport, Interference, Method,
    Noise, OutcomeModel, RegimeConfig, SimConfig,
};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn run_preset(name: &str) -> netmatch::Result<Vec<(ExperimentReport, Duration)>> {
    sim::preset(name)?
        .iter()
        .map(|c| {
            let start = Instant::now();
            let report = run_experiment(c)?;
            Ok((report, start.elapsed()))
        })
        .collect()
}

fn stat(report: &ExperimentReport, method: Method, pick: fn(&sim::MethodSummary) -> Option<f64>) -> f64 {
    report.summary(method).and_then(pick).unwrap_or(f64::INFINITY)
}

fn mean_err(s: &sim::MethodSummary) -> Option<f64> {
    s.mean_abs_error
}

fn median_err(s: &sim::MethodSummary) -> Option<f64> {
    s.median_abs_error
}

const BASELINES: [Method; 5] = [
    Method::Naive,
    Method::FirstEigenvector,
    Method::AllEigenvectors,
    Method::Stratified,
    Method::Sania,
];

fn experiment_one() -> netmatch::Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in 1..=4 {
        for (report, elapsed) in run_preset(&format!("exp1-s{s}"))? {
            let flame = stat(&report, Method::Flame, mean_err);
            let best = BASELINES
                .iter()
                .map(|&m| (m, stat(&report, m, mean_err)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("baselines");
            let ok = flame < best.1 && elapsed < Duration::from_secs(15 * 60);
            pass &= ok;
            parts.push(format!(
                "s{s}: flame {flame:.3} vs best {} {:.3} ({:.1}s)",
                best.0,
                best.1,
                elapsed.as_secs_f64()
            ));
        }
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn experiment_two() -> netmatch::Result<Verdict> {
    let runs = run_preset("exp2-b5")?;
    let report = &runs[0].0;
    let flame = stat(report, Method::Flame, median_err);
    let mut pass = flame <= 0.55 && (flame - 0.39).abs() <= 0.2;
    let mut parts = vec![format!("flame median {flame:.3}")];
    for m in BASELINES {
        let v = stat(report, m, median_err);
        pass &= flame < v;
        parts.push(format!("{m} {v:.3}"));
    }
    Ok(Verdict::new(pass, parts.join(", ")))
}

fn experiment_three() -> netmatch::Result<Verdict> {
    let runs = run_preset("exp3")?;
    let by_name = |name: &str| {
        runs.iter()
            .find(|(r, _)| r.config.name == name)
            .map(|(r, _)| r)
            .expect("exp3 setting")
    };
    let (low, high) = (by_name("exp3-g0"), by_name("exp3-g5"));
    let flame_low = stat(low, Method::Flame, mean_err);
    let flame_high = stat(high, Method::Flame, mean_err);
    let strat_high = stat(high, Method::Stratified, mean_err);
    Ok(Verdict::new(
        flame_high < flame_low && flame_high < strat_high,
        format!(
            "flame mean {flame_low:.3} at gamma 0, {flame_high:.3} at gamma 5; stratified {strat_high:.3} at gamma 5"
        ),
    ))
}

fn census_speed() -> netmatch::Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = gen_er(50, 0.05, &mut rng)?;
    let t = randomize(50, &Design::Complete { treated: 25 }, &mut rng)?;
    let start = Instant::now();
    let census = census_all_units(&g, &t, CensusOpts::default())?;
    let elapsed = start.elapsed();
    Ok(Verdict::new(
        elapsed < Duration::from_secs(30),
        format!(
            "{} units, {} subgraph types in {:.3}s",
            census.n_units(),
            census.universe.len(),
            elapsed.as_secs_f64()
        ),
    ))
}

fn is_connected(g: &Graph) -> bool {
    g.n() > 0 && g.bfs_distances(0, None).iter().all(Option::is_some)
}

fn brute_force_census(h: &LabeledGraph, max_size: usize) -> BTreeMap<CanonicalCode, u64> {
    let n = h.n();
    let t = TreatmentVector::new(h.labels.clone());
    let mut canon = Canonicalizer::new();
    let mut counts = BTreeMap::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let vertices: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let sub = LabeledGraph::induced(&h.graph, &t, &vertices).expect("induced");
        if is_connected(&sub.graph) {
            *counts.entry(canon.code_of(&sub, max_size).expect("code")).or_insert(0) += 1;
        }
    }
    counts
}

fn census_oracle() -> netmatch::Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let q = rng.random_range(0.1..0.8);
        let g = gen_er(n, q, &mut rng)?;
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let h = LabeledGraph::new(g, labels)?;
        let max_size = rng.random_range(1..=5);
        let fast: BTreeMap<CanonicalCode, u64> = enumerate_connected_subgraphs(&h, max_size)
            .iter()
            .map(|(c, &k)| (*c, k))
            .collect();
        if fast != brute_force_census(&h, max_size) {
            mismatches += 1;
        }
    }
    Ok(Verdict::new(
        mismatches == 0,
        format!("{mismatches} mismatches over 200 graphs"),
    ))
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn isomorphic(a: &LabeledGraph, b: &LabeledGraph, perms: &[Vec<usize>]) -> bool {
    let k = a.n();
    if a.graph.edge_count() != b.graph.edge_count() {
        return false;
    }
    perms.iter().any(|p| {
        (0..k).all(|v| a.labels[v] == b.labels[p[v]]) && a.graph.edges().all(|(u, v)| b.graph.has_edge(p[u], p[v]))
    })
}

fn canonical_exhaustive() -> netmatch::Result<Verdict> {
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    let mut canon = Canonicalizer::new();
    for k in 1..=4usize {
        let slots: Vec<(usize, usize)> = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).collect();
        let perms = permutations(k);
        let mut graphs = Vec::new();
        for edges in 0u32..(1 << slots.len()) {
            for labels in 0u32..(1 << k) {
                let g = Graph::new(
                    k,
                    slots
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| edges >> i & 1 == 1)
                        .map(|(_, &e)| e),
                )?;
                let h = LabeledGraph::new(g, (0..k).map(|v| labels >> v & 1 == 1).collect())?;
                let code = canon.code_of(&h, 4)?;
                graphs.push((h, code));
            }
        }
        for (i, (a, ca)) in graphs.iter().enumerate() {
            for (b, cb) in &graphs[i..] {
                pairs += 1;
                if (ca == cb) != isomorphic(a, b, &perms) {
                    mismatches += 1;
                }
            }
        }
    }
    Ok(Verdict::new(
        mismatches == 0,
        format!("{mismatches} mismatches over {pairs} pairs"),
    ))
}

fn sania_check() -> netmatch::Result<Verdict> {
    // the worked examples have no treated neighbor, where both closed forms agree
    let cases = [(1usize, true, 0.5), (1, false, -0.5), (2, true, 1.0 / 3.0)];
    let mut worst = 0.0f64;
    for (deg, z, want) in cases {
        for formula in [SaniaFormula::Unbiased, SaniaFormula::Reduced] {
            worst = worst.max((sania_weight(4, deg, 0, z, 0.5, formula) - want).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 30;
    let p = 0.4;
    let g = gen_er(n, 0.1, &mut rng)?;
    let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let tau: Vec<f64> = (0..n).map(|_| rng.random_range(3.0..7.0)).collect();
    let target = tau.iter().sum::<f64>() / n as f64;
    let draws = 2000;
    let mut estimates = Vec::with_capacity(draws);
    for _ in 0..draws {
        let z = randomize(n, &Design::Bernoulli { p }, &mut rng)?;
        let y: Vec<f64> = (0..n)
            .map(|i| alpha[i] + if z.is_treated(i) { tau[i] } else { 0.0 })
            .collect();
        estimates.push(sania_estimate(&sania_weights(&g, &z, p, SaniaFormula::default())?, &y)?);
    }
    let mean = estimates.iter().sum::<f64>() / draws as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    let z_score = (mean - target) / se;
    Ok(Verdict::new(
        worst <= 1e-12 && z_score.abs() <= 3.0,
        format!("worst weight error {worst:.1e}; Monte Carlo mean {mean:.3} vs {target:.3}, {z_score:.2} SE"),
    ))
}

fn no_interference() -> netmatch::Result<Verdict> {
    let outcome = OutcomeModel {
        interference: Interference::None,
        noise: Noise::Homoskedastic { sd: 1.0 },
        ..OutcomeModel::default()
    };
    let config = SimConfig {
        name: "no-interference".into(),
        graph: sim::GraphSpec::Er { n: 50, q: 0.05 },
        fixed_graph: false,
        design: Design::Complete { treated: 25 },
        outcome: outcome.clone(),
        methods: Method::STANDARD.to_vec(),
        replications: 500,
        seed: 8,
        census: CensusOpts::default(),
        bins: BinScheme::Exact,
        matching: MatchConfig::default(),
        baselines: Default::default(),
        match_quality: false,
    };
    let report = run_experiment(&config)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for s in &report.summaries {
        let m = s.mean_abs_error.unwrap_or(f64::INFINITY);
        pass &= m < 0.5 && s.failures == 0;
        parts.push(format!("{} {m:.3}", s.method));
    }

    let mut groups = 0usize;
    let mut unsound = 0usize;
    let ids: Vec<String> = (0..50).map(|i| i.to_string()).collect();
    for rep in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(8 + rep);
        let g = gen_er(50, 0.05, &mut rng)?;
        let t = randomize(50, &config.design, &mut rng)?;
        let out = gen_outcomes(&outcome, &g, &t, &mut rng)?;
        let matching = MatchConfig {
            seed: 8 + rep,
            ..MatchConfig::default()
        };
        let no_covariates: [CovariateColumn; 0] = [];
        let pipe = match_on_graph(
            &g,
            &t,
            &out.y,
            &ids,
            &no_covariates,
            CensusOpts::default(),
            BinScheme::Exact,
            &matching,
        )?;
        for group in &pipe.result.groups {
            groups += 1;
            let sound = group.n_treated() > 0
                && group.n_treated() < group.size()
                && group.members.iter().all(|m| {
                    group
                        .columns
                        .iter()
                        .zip(&group.signature)
                        .all(|(&c, &v)| pipe.features.value(m.unit, c) == v)
                });
            unsound += usize::from(!sound);
        }
    }
    pass &= unsound == 0 && groups > 0;
    parts.push(format!("{unsound} of {groups} groups unsound"));
    Ok(Verdict::new(pass, parts.join(", ")))
}

fn match_quality() -> netmatch::Result<Verdict> {
    let runs = run_preset("matchqual")?;
    let report = &runs[0].0;
    let pick = |m| {
        report
            .summary(m)
            .and_then(|s| s.mean_graph_distance)
            .unwrap_or(f64::INFINITY)
    };
    let (flame, eigen) = (pick(Method::Flame), pick(Method::AllEigenvectors));
    Ok(Verdict::new(
        flame <= eigen,
        format!("mean graph distance flame {flame:.3}, all-eigenvectors {eigen:.3}"),
    ))
}

fn regime() -> netmatch::Result<Verdict> {
    let report = run_regime(&RegimeConfig::default())?;
    let errors: Vec<String> = report
        .points
        .iter()
        .map(|p| format!("N={} {:.3}", p.pool_size, p.mean_abs_error))
        .collect();
    Ok(Verdict::new(
        report.is_non_increasing(),
        format!("{} ({} replications)", errors.join(", "), report.used),
    ))
}

type Criterion = (&'static str, fn() -> netmatch::Result<Verdict>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("experiment 1 ordering", experiment_one),
        ("experiment 2 covariate adjustment", experiment_two),
        ("experiment 3 trend", experiment_three),
        ("census speed", census_speed),
        ("census oracle", census_oracle),
        ("canonical codes", canonical_exhaustive),
        ("closed-form weights", sania_check),
        ("no-interference sanity", no_interference),
        ("match quality", match_quality),
        ("pool-size regime", regime),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = check().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        failures += usize::from(!verdict.pass);
        let tag = if verdict.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {}", i + 1, verdict.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 && std::env::var_os("NETMATCH_ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
