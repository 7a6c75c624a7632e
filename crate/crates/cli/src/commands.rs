use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use netmatch::baselines::{run_baselines, Baseline, BaselineOpts};
use netmatch::census::{census_all_units, BinScheme, CensusOpts};
use netmatch::flame::{match_on_graph, Holdout, MatchConfig};
use netmatch::graph::NeighborhoodOpts;
use netmatch::interference::{compute_components, CentralityScope, Component};
use netmatch::io::{self, Dataset};
use netmatch::sim::{self, group_match_quality, NeighborhoodDistances, SimConfig};

use crate::args::{
    BaselinesArgs, CensusArgs, CensusOptArgs, Cli, Command, DataArgs, EstimateArgs, EvaluateArgs, SimulateArgs,
};

/// Caps the global worker pool at `NETMATCH_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("NETMATCH_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("NETMATCH_THREADS must be a positive integer, got `{raw}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Census(a) => census(a),
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Baselines(a) => baselines(a),
        Command::EvaluateMatches(a) => evaluate(a),
    }
}

fn load(data: &DataArgs) -> Result<Dataset> {
    let mut ds = io::load_dataset(&data.edges, &data.units)?;
    if let Some(cap) = data.max_degree {
        let (graph, units) = io::filter_max_degree(&ds.graph, &ds.units, cap)?;
        ds = Dataset { graph, units };
    }
    Ok(ds)
}

fn census_opts(a: &CensusOptArgs) -> CensusOpts {
    CensusOpts {
        neighborhood: NeighborhoodOpts {
            hops: a.hops,
            include_ego: false,
        },
        max_size: a.motif_size,
    }
}

fn write_with<F>(dir: &Path, name: &str, f: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> netmatch::Result<()>,
{
    let (path, mut w) = io::create_in(dir, name)?;
    f(&mut w)?;
    std::io::Write::flush(&mut w).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn census(a: CensusArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let t = ds.units.treatment();
    let census = census_all_units(&ds.graph, &t, census_opts(&a.census))?;
    write_with(&a.out_dir, "census.csv", |w| {
        io::write_census(w, &census, &ds.units.ids)
    })?;
    if a.components {
        let m = compute_components(&ds.graph, &t, &Component::STANDARD, CentralityScope::default())?;
        write_with(&a.out_dir, "components.csv", |w| {
            io::write_components(w, &m, &ds.units.ids)
        })?;
    }
    Ok(())
}

fn parse_baselines(spec: &str) -> Result<Vec<Baseline>> {
    match spec.trim() {
        "none" | "" => Ok(Vec::new()),
        "all" => Ok(Baseline::ALL.to_vec()),
        list => list
            .split(',')
            .map(|s| s.trim().parse::<Baseline>().map_err(anyhow::Error::from))
            .collect(),
    }
}

fn baseline_json(results: Vec<(Baseline, netmatch::Result<netmatch::baselines::BaselineEstimate>)>) -> Vec<Value> {
    results
        .into_iter()
        .map(|(m, r)| match r {
            Ok(e) => json!({"method": m.name(), "estimate": e.estimate, "failure": null}),
            Err(err) => json!({"method": m.name(), "estimate": null, "failure": err.to_string()}),
        })
        .collect()
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let t = ds.units.treatment();
    let mut config: MatchConfig = match &a.match_config {
        Some(p) => serde_json::from_reader(std::fs::File::open(p).with_context(|| format!("reading {}", p.display()))?)
            .map_err(netmatch::Error::from)?,
        None => MatchConfig::default(),
    };
    if let Some(c) = a.c {
        config.c = c;
    }
    if let Some(d) = a.d {
        config.d = d;
    }
    if let Some(r) = a.ridge {
        config.ridge_penalty = r;
    }
    if let Some(f) = a.holdout {
        config.holdout = Holdout::Fraction { fraction: f };
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let bins = match a.bins {
        Some(b) => BinScheme::Quantile { bins: b },
        None => BinScheme::Exact,
    };
    let methods = parse_baselines(&a.baselines)?;
    let pipeline = match_on_graph(
        &ds.graph,
        &t,
        &ds.units.outcome,
        &ds.units.ids,
        &ds.units.covariates,
        census_opts(&a.census),
        bins,
        &config,
    )?;
    let result = &pipeline.result;
    write_with(&a.out_dir, "groups.csv", |w| {
        io::write_groups(w, &result.groups, &pipeline.features)
    })?;
    write_with(&a.out_dir, "drop_log.csv", |w| io::write_drop_log(w, &result.drop_log))?;

    let mut estimates = vec![json!({
        "method": "flame",
        "estimate": result.ade,
        "failure": if result.ade.is_none() { Value::from("no matched groups") } else { Value::Null },
    })];
    estimates.extend(baseline_json(run_baselines(
        &methods,
        &ds.graph,
        &ds.units.outcome,
        &t,
        &BaselineOpts::default(),
    )));
    let unit_id = |i: &usize| ds.units.ids[*i].clone();
    let report = json!({
        "units": ds.graph.n(),
        "treated": t.n_treated(),
        "estimates": estimates,
        "matching": {
            "groups": result.groups.len(),
            "matched_units": result.matched_units(),
            "unmatched": result.unmatched.iter().map(unit_id).collect::<Vec<_>>(),
            "holdout": result.holdout.iter().map(unit_id).collect::<Vec<_>>(),
            "stop_reason": result.stop_reason,
            "dropped": result.drop_log.iter().map(|d| d.dropped.clone()).collect::<Vec<_>>(),
            "config": config,
        },
    });
    write_with(&a.out_dir, "estimates.json", |w| io::write_json(w, &report))?;
    if result.ade.is_none() {
        return Err(netmatch::Error::Undefined("no treated unit was matched".into()).into());
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut configs: Vec<SimConfig> = match (&a.preset, &a.config) {
        (Some(name), _) => sim::preset(name)?,
        (None, Some(path)) => {
            let file = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            let value: Value = serde_json::from_reader(file).map_err(netmatch::Error::from)?;
            if value.is_array() {
                serde_json::from_value(value).map_err(netmatch::Error::from)?
            } else {
                vec![serde_json::from_value(value).map_err(netmatch::Error::from)?]
            }
        }
        (None, None) => unreachable!("clap requires one of --preset and --config"),
    };
    for c in &mut configs {
        if let Some(r) = a.reps {
            c.replications = r;
        }
        if let Some(s) = a.seed {
            c.seed = s;
        }
    }
    let mut records = Vec::new();
    let mut summary_rows = Vec::new();
    let mut summary_json = Vec::new();
    for c in &configs {
        let report = sim::run_experiment(c)?;
        for s in &report.summaries {
            summary_rows.push((c.name.clone(), s.clone()));
        }
        summary_json.push(json!({"setting": c.name, "config": c, "summaries": report.summaries}));
        records.extend(report.records);
    }
    write_with(&a.out_dir, "replications.csv", |w| io::write_replications(w, &records))?;
    write_with(&a.out_dir, "summary.csv", |w| io::write_summaries(w, &summary_rows))?;
    write_with(&a.out_dir, "summary.json", |w| io::write_json(w, &summary_json))?;
    for (setting, s) in &summary_rows {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{setting:<12} {:<18} mean {:>8} median {:>8} distance {:>6} failures {}",
            s.method.name(),
            fmt(s.mean_abs_error),
            fmt(s.median_abs_error),
            fmt(s.mean_graph_distance),
            s.failures
        );
    }
    Ok(())
}

fn baselines(a: BaselinesArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let t = ds.units.treatment();
    let methods = parse_baselines(&a.methods)?;
    let opts = BaselineOpts {
        sania_p: a.treatment_probability,
        ..BaselineOpts::default()
    };
    let results = run_baselines(&methods, &ds.graph, &ds.units.outcome, &t, &opts);
    let report = json!({"units": ds.graph.n(), "treated": t.n_treated(), "estimates": baseline_json(results)});
    write_with(&a.out_dir, "baselines.json", |w| io::write_json(w, &report))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let t = ds.units.treatment();
    let file = std::fs::File::open(&a.groups).with_context(|| format!("reading {}", a.groups.display()))?;
    let groups = io::read_groups(file, &a.groups, &ds.units.ids)?;
    let dist = NeighborhoodDistances::new(&ds.graph, &t)?;
    let mean = group_match_quality(&groups, &dist)?;
    let report = json!({"groups": groups.len(), "mean_graph_distance": mean});
    write_with(&a.out_dir, "match_quality.json", |w| io::write_json(w, &report))?;
    println!("mean graph distance {mean}");
    Ok(())
}
