use serde::{Deserialize, Serialize};

use crate::census::{CanonicalCode, Census};
use crate::error::{Error, Result};

/// How raw subgraph counts become matching categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum BinScheme {
    /// The count itself is the category.
    #[default]
    Exact,
    /// Bin index by empirical quantiles of the column.
    Quantile { bins: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Subgraph(CanonicalCode),
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn code(&self) -> Option<CanonicalCode> {
        match self.kind {
            ColumnKind::Subgraph(code) => Some(code),
            ColumnKind::Covariate => None,
        }
    }
}

/// A unit-level discrete covariate appended to the subgraph columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateColumn {
    pub name: String,
    pub values: Vec<i64>,
}

/// Units x discrete matching covariates. Every cell is populated; a unit
/// without a motif carries an explicit zero count.
///
/// Exact agreement on a categorical column is the same as agreement on all
/// of its one-hot indicators, so columns stay categorical here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTable {
    unit_ids: Vec<String>,
    columns: Vec<Column>,
    values: Vec<i64>,
}

impl FeatureTable {
    pub fn new(unit_ids: Vec<String>, columns: Vec<Column>, rows: Vec<Vec<i64>>) -> Result<Self> {
        if rows.len() != unit_ids.len() {
            return Err(Error::LengthMismatch {
                what: "feature rows vs unit ids",
                expected: unit_ids.len(),
                actual: rows.len(),
            });
        }
        let mut values = Vec::with_capacity(rows.len() * columns.len());
        for row in rows {
            if row.len() != columns.len() {
                return Err(Error::LengthMismatch {
                    what: "feature row width",
                    expected: columns.len(),
                    actual: row.len(),
                });
            }
            values.extend(row);
        }
        Ok(Self {
            unit_ids,
            columns,
            values,
        })
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    #[inline]
    pub fn value(&self, unit: usize, column: usize) -> i64 {
        self.values[unit * self.columns.len() + column]
    }

    #[inline]
    pub fn row(&self, unit: usize) -> &[i64] {
        let w = self.columns.len();
        &self.values[unit * w..(unit + 1) * w]
    }

    pub fn column_values(&self, column: usize) -> Vec<i64> {
        (0..self.n_units()).map(|u| self.value(u, column)).collect()
    }
}

/// Type-7 (linear interpolation) quantile bins: boundaries at `k/bins` for
/// `k = 1..bins`, and a value's bin is the number of boundaries strictly
/// below it, so ties land in the lower bin.
pub fn quantile_bins(values: &[f64], bins: usize) -> Vec<i64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return Vec::new();
    }
    let quantile = |p: f64| {
        let h = (n - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let bounds: Vec<f64> = (1..bins).map(|k| quantile(k as f64 / bins as f64)).collect();
    values
        .iter()
        .map(|&v| bounds.iter().filter(|&&b| b < v).count() as i64)
        .collect()
}

/// Builds the matching feature table: one categorical column per code of
/// the census universe, then the covariates unchanged.
pub fn binarize(
    census: &Census,
    unit_ids: &[String],
    scheme: BinScheme,
    covariates: &[CovariateColumn],
) -> Result<FeatureTable> {
    let n = census.n_units();
    if unit_ids.len() != n {
        return Err(Error::LengthMismatch {
            what: "unit ids vs census units",
            expected: n,
            actual: unit_ids.len(),
        });
    }
    if let BinScheme::Quantile { bins } = scheme {
        if bins < 2 {
            return Err(Error::input("quantile binning needs at least 2 bins"));
        }
    }
    for cov in covariates {
        if cov.values.len() != n {
            return Err(Error::LengthMismatch {
                what: "covariate column length",
                expected: n,
                actual: cov.values.len(),
            });
        }
    }

    let counts = census.matrix();
    let mut columns = Vec::with_capacity(census.universe.len() + covariates.len());
    let mut by_column: Vec<Vec<i64>> = Vec::with_capacity(columns.capacity());
    for (j, code) in census.universe.iter().enumerate() {
        let raw: Vec<u64> = counts.iter().map(|row| row[j]).collect();
        let cats = match scheme {
            BinScheme::Exact => raw.iter().map(|&c| c as i64).collect(),
            BinScheme::Quantile { bins } => {
                if raw.iter().all(|&c| c == raw[0]) {
                    log::warn!("column {code} is constant; placed in a single bin");
                    vec![0; n]
                } else {
                    let as_f: Vec<f64> = raw.iter().map(|&c| c as f64).collect();
                    quantile_bins(&as_f, bins)
                }
            }
        };
        columns.push(Column {
            name: code.column_name(),
            kind: ColumnKind::Subgraph(*code),
        });
        by_column.push(cats);
    }
    for cov in covariates {
        if columns.iter().any(|c| c.name == cov.name) {
            return Err(Error::input(format!("duplicate column name `{}`", cov.name)));
        }
        columns.push(Column {
            name: cov.name.clone(),
            kind: ColumnKind::Covariate,
        });
        by_column.push(cov.values.clone());
    }
    let rows = (0..n).map(|u| by_column.iter().map(|col| col[u]).collect()).collect();
    FeatureTable::new(unit_ids.to_vec(), columns, rows)
}
