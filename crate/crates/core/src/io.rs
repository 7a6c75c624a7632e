//! File formats: edge lists, unit tables and report writers.
//!
//! Every table is CSV with a header row and every number is written with
//! the locale-independent shortest round-trip formatting of `f64`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::census::{Census, CovariateColumn, FeatureTable};
use crate::error::{Error, Result};
use crate::flame::{DropRecord, MatchedGroup};
use crate::graph::{Graph, TreatmentVector};
use crate::interference::ComponentMatrix;
use crate::sim::{MethodSummary, ReplicationRecord};

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn record_line(r: &csv::StringRecord) -> u64 {
    r.position().map_or(0, |p| p.line())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

/// Sorts ids numerically when all of them are integers, otherwise
/// lexicographically.
pub fn sort_ids(ids: &mut [String]) {
    if ids.iter().all(|s| s.parse::<i64>().is_ok()) {
        ids.sort_by_key(|s| s.parse::<i64>().expect("checked"));
    } else {
        ids.sort();
    }
}

/// A graph read from a file with the external id of every vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// External id of vertex `v` at position `v`, in sorted order.
    pub ids: Vec<String>,
}

/// Reads `src,dst` rows. Self-loops are dropped with a warning; repeated
/// and reversed rows are kept and collapse when the graph is built.
pub fn read_edge_pairs<R: Read>(reader: R, path: &Path) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "src" || &headers[1] != "dst" {
        return Err(parse_error(path, 1, "expected header `src,dst`"));
    }
    let mut pairs = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record_line(&row);
        if row.len() != 2 {
            return Err(parse_error(
                path,
                line,
                format!("expected 2 fields, found {}", row.len()),
            ));
        }
        let (a, b) = (row[0].to_string(), row[1].to_string());
        if a.is_empty() || b.is_empty() {
            return Err(parse_error(path, line, "empty vertex id"));
        }
        if a == b {
            log::warn!("{}:{line}: self-loop on `{a}` dropped", path.display());
            continue;
        }
        pairs.push((a, b));
    }
    Ok(pairs)
}

/// Builds a graph on `ids` (vertex `v` is `ids[v]`) from id pairs.
pub fn graph_from_pairs(ids: &[String], pairs: &[(String, String)]) -> Result<Graph> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != ids.len() {
        return Err(Error::input("duplicate vertex ids"));
    }
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::input(format!("edge endpoint `{id}` is not a known unit")))
    };
    let mut edges = BTreeSet::new();
    for (a, b) in pairs {
        let (u, v) = (lookup(a)?, lookup(b)?);
        edges.insert((u.min(v), u.max(v)));
    }
    Graph::new(ids.len(), edges)
}

/// Loads an edge list whose vertex set is the set of ids it mentions.
pub fn load_edge_list(path: &Path) -> Result<LoadedGraph> {
    let pairs = read_edge_pairs(open(path)?, path)?;
    let mut ids: Vec<String> = pairs
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    sort_ids(&mut ids);
    let graph = graph_from_pairs(&ids, &pairs)?;
    Ok(LoadedGraph { graph, ids })
}

/// Writes `src,dst` rows, one per edge with the smaller endpoint first.
pub fn write_edge_list<W: Write>(writer: W, g: &Graph, ids: &[String]) -> Result<()> {
    if ids.len() != g.n() {
        return Err(Error::LengthMismatch {
            what: "vertex ids",
            expected: g.n(),
            actual: ids.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["src", "dst"])?;
    for (u, v) in g.edges() {
        w.write_record([&ids[u], &ids[v]])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-unit treatment, outcome and discrete covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTable {
    pub ids: Vec<String>,
    pub treated: Vec<bool>,
    pub outcome: Vec<f64>,
    pub covariates: Vec<CovariateColumn>,
}

impl UnitTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn treatment(&self) -> TreatmentVector {
        TreatmentVector::new(self.treated.clone())
    }

    /// Rows at `keep`, in that order.
    pub fn select(&self, keep: &[usize]) -> UnitTable {
        UnitTable {
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            treated: keep.iter().map(|&i| self.treated[i]).collect(),
            outcome: keep.iter().map(|&i| self.outcome[i]).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|c| CovariateColumn {
                    name: c.name.clone(),
                    values: keep.iter().map(|&i| c.values[i]).collect(),
                })
                .collect(),
        }
    }

    /// Rows in sorted id order.
    pub fn sorted(&self) -> UnitTable {
        let mut ids = self.ids.clone();
        sort_ids(&mut ids);
        let pos: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let order: Vec<usize> = ids.iter().map(|s| pos[s.as_str()]).collect();
        self.select(&order)
    }
}

/// Integer levels as given, anything else coded by sorted distinct value.
fn encode_levels(raw: &[String]) -> Vec<i64> {
    if let Ok(values) = raw
        .iter()
        .map(|s| s.parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
    {
        return values;
    }
    let levels: BTreeMap<&str, i64> = raw
        .iter()
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .zip(0..)
        .collect();
    raw.iter().map(|s| levels[s.as_str()]).collect()
}

fn parse_treated(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "TRUE" | "True" => Some(true),
        "0" | "false" | "FALSE" | "False" => Some(false),
        _ => None,
    }
}

/// Reads a unit table with header `id,treated,outcome[,covariate...]`.
pub fn read_unit_table<R: Read>(reader: R, path: &Path) -> Result<UnitTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "treated" || &headers[2] != "outcome" {
        return Err(parse_error(
            path,
            1,
            "expected header starting with `id,treated,outcome`",
        ));
    }
    let cov_names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut treated = Vec::new();
    let mut outcome = Vec::new();
    let mut raw_cov: Vec<Vec<String>> = vec![Vec::new(); cov_names.len()];
    let mut seen = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record_line(&row);
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty unit id"));
        }
        if let Some(prev) = seen.insert(id.clone(), line) {
            return Err(parse_error(
                path,
                line,
                format!("duplicate unit id `{id}` (first on line {prev})"),
            ));
        }
        let t = parse_treated(&row[1])
            .ok_or_else(|| parse_error(path, line, format!("treated must be 0 or 1, got `{}`", &row[1])))?;
        let y: f64 = row[2].parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
            parse_error(
                path,
                line,
                format!("outcome must be a finite number, got `{}`", &row[2]),
            )
        })?;
        for (k, col) in raw_cov.iter_mut().enumerate() {
            let v = &row[3 + k];
            if v.is_empty() {
                return Err(parse_error(path, line, format!("missing value for `{}`", cov_names[k])));
            }
            col.push(v.to_string());
        }
        ids.push(id);
        treated.push(t);
        outcome.push(y);
    }
    let covariates = cov_names
        .into_iter()
        .zip(raw_cov)
        .map(|(name, raw)| CovariateColumn {
            name,
            values: encode_levels(&raw),
        })
        .collect();
    Ok(UnitTable {
        ids,
        treated,
        outcome,
        covariates,
    })
}

pub fn load_unit_table(path: &Path) -> Result<UnitTable> {
    read_unit_table(open(path)?, path)
}

/// A unit table with its network, vertex `v` being unit `v` of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub units: UnitTable,
}

/// Loads units (sorted by id) and the edges among them. Units without edges
/// are isolated vertices; an edge naming an unknown unit is an error.
pub fn load_dataset(edges: &Path, units: &Path) -> Result<Dataset> {
    let units = load_unit_table(units)?.sorted();
    let pairs = read_edge_pairs(open(edges)?, edges)?;
    let graph = graph_from_pairs(&units.ids, &pairs)?;
    Ok(Dataset { graph, units })
}

/// Removes units whose degree exceeds `cap` and re-induces the graph on
/// the rest.
pub fn filter_max_degree(g: &Graph, units: &UnitTable, cap: usize) -> Result<(Graph, UnitTable)> {
    if cap == 0 {
        return Err(Error::input("degree cap must be at least 1"));
    }
    if units.len() != g.n() {
        return Err(Error::LengthMismatch {
            what: "unit table rows vs graph vertices",
            expected: g.n(),
            actual: units.len(),
        });
    }
    let keep: Vec<usize> = (0..g.n()).filter(|&v| g.degree(v) <= cap).collect();
    if keep.is_empty() {
        return Err(Error::input(format!("every unit has degree above {cap}")));
    }
    let removed = g.n() - keep.len();
    if removed > 0 {
        log::info!("removed {removed} units with degree above {cap}");
    }
    Ok((g.induced_subgraph(&keep)?, units.select(&keep)))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `iteration,dropped,balancing_factor,pe_outcome,pe_network,match_quality`
pub fn write_drop_log<W: Write>(writer: W, log: &[DropRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "iteration",
        "dropped",
        "balancing_factor",
        "pe_outcome",
        "pe_network",
        "match_quality",
    ])?;
    for r in log {
        w.write_record([
            r.iteration.to_string(),
            r.dropped.clone(),
            num(r.balancing_factor),
            num(r.pe_outcome),
            num(r.pe_network),
            num(r.match_quality),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per group member:
/// `group,iteration,unit,treated,outcome,signature`, where the signature
/// lists `column=value` pairs of the active columns joined by `;`.
pub fn write_groups<W: Write>(writer: W, groups: &[MatchedGroup], features: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "iteration", "unit", "treated", "outcome", "signature"])?;
    let names = features.columns();
    for (g, group) in groups.iter().enumerate() {
        let signature = group
            .columns
            .iter()
            .zip(&group.signature)
            .map(|(&c, v)| format!("{}={v}", names[c].name))
            .collect::<Vec<_>>()
            .join(";");
        for m in &group.members {
            w.write_record([
                g.to_string(),
                group.iteration.to_string(),
                features.unit_ids()[m.unit].clone(),
                u8::from(m.treated).to_string(),
                num(m.outcome),
                signature.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the membership part of a groups file back, mapping unit ids to
/// positions in `ids`. Columns and signatures are not restored.
pub fn read_groups<R: Read>(reader: R, path: &Path, ids: &[String]) -> Result<Vec<MatchedGroup>> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(path, 1, format!("missing column `{name}`")))
    };
    let (gc, ic, uc, tc, oc) = (
        col("group")?,
        col("iteration")?,
        col("unit")?,
        col("treated")?,
        col("outcome")?,
    );
    let mut groups: BTreeMap<usize, MatchedGroup> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| parse_error(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&row);
        let int = |c: usize| {
            row[c]
                .parse::<usize>()
                .map_err(|_| parse_error(path, line, format!("expected an integer, got `{}`", &row[c])))
        };
        let (g, iteration) = (int(gc)?, int(ic)?);
        let unit = *index
            .get(&row[uc])
            .ok_or_else(|| parse_error(path, line, format!("unknown unit `{}`", &row[uc])))?;
        let treated = parse_treated(&row[tc]).ok_or_else(|| parse_error(path, line, "treated must be 0 or 1"))?;
        let outcome = row[oc]
            .parse::<f64>()
            .map_err(|_| parse_error(path, line, format!("bad outcome `{}`", &row[oc])))?;
        groups
            .entry(g)
            .or_insert_with(|| MatchedGroup {
                columns: Vec::new(),
                signature: Vec::new(),
                members: Vec::new(),
                iteration,
            })
            .members
            .push(crate::flame::GroupMember { unit, treated, outcome });
    }
    Ok(groups.into_values().collect())
}

/// Unit id then one count column per code of the universe.
pub fn write_census<W: Write>(writer: W, census: &Census, ids: &[String]) -> Result<()> {
    if ids.len() != census.n_units() {
        return Err(Error::LengthMismatch {
            what: "unit ids vs census units",
            expected: census.n_units(),
            actual: ids.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit".to_string()];
    header.extend(census.universe.iter().map(|c| c.column_name()));
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(census.matrix()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Unit id then one column per interference component.
pub fn write_components<W: Write>(writer: W, m: &ComponentMatrix, ids: &[String]) -> Result<()> {
    if ids.len() != m.n_units() {
        return Err(Error::LengthMismatch {
            what: "unit ids vs component rows",
            expected: m.n_units(),
            actual: ids.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit".to_string()];
    header.extend(m.names.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(&m.rows) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|&x| num(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `setting,replication,seed,true_ade,method,estimate,abs_error,graph_distance,failure`
pub fn write_replications<W: Write>(writer: W, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "setting",
        "replication",
        "seed",
        "true_ade",
        "method",
        "estimate",
        "abs_error",
        "graph_distance",
        "failure",
    ])?;
    for r in records {
        for o in &r.outcomes {
            w.write_record([
                r.setting.clone(),
                r.replication.to_string(),
                r.seed.to_string(),
                num(r.true_ade),
                o.method.to_string(),
                opt(o.estimate),
                opt(o.abs_error),
                opt(o.graph_distance),
                o.failure.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `setting,method,successes,failures,mean_abs_error,median_abs_error,q25_abs_error,q75_abs_error,mean_graph_distance`
pub fn write_summaries<W: Write>(writer: W, rows: &[(String, MethodSummary)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "setting",
        "method",
        "successes",
        "failures",
        "mean_abs_error",
        "median_abs_error",
        "q25_abs_error",
        "q75_abs_error",
        "mean_graph_distance",
    ])?;
    for (setting, s) in rows {
        w.write_record([
            setting.clone(),
            s.method.to_string(),
            s.successes.to_string(),
            s.failures.to_string(),
            opt(s.mean_abs_error),
            opt(s.median_abs_error),
            opt(s.q25_abs_error),
            opt(s.q75_abs_error),
            opt(s.mean_graph_distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Creates `dir/name` for writing, creating `dir` if needed.
pub fn create_in(dir: &Path, name: &str) -> Result<(PathBuf, std::io::BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok((path, std::io::BufWriter::new(file)))
}
