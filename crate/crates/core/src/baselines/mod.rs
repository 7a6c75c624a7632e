//! Comparison estimators of the average direct effect.

mod eigen;
mod sania;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use eigen::{
    adjacency_matrix, eigen_match, nearest_control, sym_eigen, EigenMetric, EigenMode, EigenSpectrum, Pairing,
};
pub use sania::{sania_estimate, sania_weight, sania_weights, SaniaFormula, SaniaWeights};

use crate::error::{Error, Result};
use crate::graph::{treated_degree, Graph, TreatmentVector};

fn arm_means(y: &[f64], t: &TreatmentVector, units: impl Iterator<Item = usize>) -> Option<(f64, f64)> {
    let (mut st, mut nt, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
    for i in units {
        if t.is_treated(i) {
            st += y[i];
            nt += 1;
        } else {
            sc += y[i];
            nc += 1;
        }
    }
    (nt > 0 && nc > 0).then(|| (st / nt as f64, sc / nc as f64))
}

/// Difference in arm means.
pub fn naive_dim(y: &[f64], t: &TreatmentVector) -> Result<f64> {
    check_lengths(y, t)?;
    arm_means(y, t, 0..t.len())
        .map(|(a, b)| a - b)
        .ok_or_else(|| Error::input("both arms must be nonempty"))
}

/// Differences in arm means within treated-degree strata, averaged with
/// stratum sizes as weights. Strata missing an arm are skipped.
pub fn stratified_naive(g: &Graph, y: &[f64], t: &TreatmentVector) -> Result<f64> {
    check_lengths(y, t)?;
    t.check_against(g)?;
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..g.n() {
        strata.entry(treated_degree(g, t, i)).or_default().push(i);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for units in strata.values() {
        if let Some((a, b)) = arm_means(y, t, units.iter().copied()) {
            num += units.len() as f64 * (a - b);
            den += units.len() as f64;
        }
    }
    if den == 0.0 {
        return Err(Error::Undefined("no treated-degree stratum contains both arms".into()));
    }
    Ok(num / den)
}

fn check_lengths(y: &[f64], t: &TreatmentVector) -> Result<()> {
    if y.len() != t.len() {
        return Err(Error::LengthMismatch {
            what: "outcomes vs treatments",
            expected: t.len(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// The comparison estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Naive,
    FirstEigenvector,
    AllEigenvectors,
    Stratified,
    Sania,
}

impl Baseline {
    pub const ALL: [Baseline; 5] = [
        Baseline::Naive,
        Baseline::FirstEigenvector,
        Baseline::AllEigenvectors,
        Baseline::Stratified,
        Baseline::Sania,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Naive => "naive",
            Baseline::FirstEigenvector => "first-eigenvector",
            Baseline::AllEigenvectors => "all-eigenvectors",
            Baseline::Stratified => "stratified",
            Baseline::Sania => "sania",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::input(format!("unknown baseline `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineOpts {
    /// Standardize eigenvector coordinates by their sample sd.
    pub standardize_eigen: bool,
    /// Treatment probability for the SANIA weights; `None` plugs in the
    /// observed treated share.
    pub sania_p: Option<f64>,
    pub sania_formula: SaniaFormula,
}

impl Default for BaselineOpts {
    fn default() -> Self {
        Self {
            standardize_eigen: true,
            sania_p: None,
            sania_formula: SaniaFormula::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimate {
    pub method: Baseline,
    pub estimate: f64,
    /// `(treated, control)` pairs of the eigenvector matchers.
    pub pairs: Option<Vec<(usize, usize)>>,
    /// Treatment probability used by SANIA.
    pub treatment_probability: Option<f64>,
}

/// Runs the requested baselines, computing the spectrum at most once.
/// Failures are reported per method.
pub fn run_baselines(
    methods: &[Baseline],
    g: &Graph,
    y: &[f64],
    t: &TreatmentVector,
    opts: &BaselineOpts,
) -> Vec<(Baseline, Result<BaselineEstimate>)> {
    let needs_spectrum = methods
        .iter()
        .any(|m| matches!(m, Baseline::FirstEigenvector | Baseline::AllEigenvectors));
    let spectrum = needs_spectrum.then(|| EigenSpectrum::of_graph(g));
    methods
        .iter()
        .map(|&method| {
            let plain = |estimate| BaselineEstimate {
                method,
                estimate,
                pairs: None,
                treatment_probability: None,
            };
            let result = match method {
                Baseline::Naive => naive_dim(y, t).map(plain),
                Baseline::Stratified => stratified_naive(g, y, t).map(plain),
                Baseline::FirstEigenvector | Baseline::AllEigenvectors => {
                    let mode = if method == Baseline::FirstEigenvector {
                        EigenMode::First
                    } else {
                        EigenMode::All
                    };
                    match spectrum.as_ref().expect("spectrum computed") {
                        Ok(s) => eigen_match(s, y, t, mode, opts.standardize_eigen).map(|p| BaselineEstimate {
                            method,
                            estimate: p.estimate,
                            pairs: Some(p.pairs),
                            treatment_probability: None,
                        }),
                        Err(e) => Err(Error::Numerical(e.to_string())),
                    }
                }
                Baseline::Sania => {
                    let p = opts.sania_p.unwrap_or(t.n_treated() as f64 / t.len().max(1) as f64);
                    sania_weights(g, t, p, opts.sania_formula)
                        .and_then(|w| sania_estimate(&w, y))
                        .map(|estimate| BaselineEstimate {
                            method,
                            estimate,
                            pairs: None,
                            treatment_probability: Some(p),
                        })
                }
            };
            (method, result)
        })
        .collect()
}
