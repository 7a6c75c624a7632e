//! Network prediction error: a logistic model for the presence of each
//! unordered pair's edge, with linear predictor
//! `b0 + beta^T (s_i + s_j)` on the units' masked census counts, scored by
//! AIC.
//!
//! Every pair-level sum factors through unit-level quantities, so one IRLS
//! step costs `O(n^2 + n p^2 + p^3)` for `n` units and `p` columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Ridge penalty on the slopes (features are standardized) that keeps the
/// Newton system solvable under collinearity or separation.
const STABILIZER: f64 = 1e-4;
const MAX_ITER: usize = 50;
const TOL: f64 = 1e-9;

/// Fixed inputs of the edge model: the graph's adjacency and each unit's
/// standardized census counts.
#[derive(Debug, Clone)]
pub struct EdgeModel {
    n: usize,
    adjacency: Vec<bool>,
    /// Column-major standardized counts; `None` marks a constant column.
    columns: Vec<Option<Vec<f64>>>,
    edges: usize,
}

/// Result of one edge-model fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFit {
    pub aic: f64,
    pub log_likelihood: f64,
    /// Number of fitted parameters, intercept included.
    pub parameters: usize,
    pub converged: bool,
    /// Intercept followed by one slope per active column (0 for constant
    /// columns), in the order the columns were given.
    pub coefficients: Vec<f64>,
}

impl EdgeModel {
    /// `counts[u][c]` is unit `u`'s raw count for census column `c`.
    pub fn new(g: &Graph, counts: &[Vec<f64>]) -> Result<Self> {
        let n = g.n();
        if counts.len() != n {
            return Err(Error::LengthMismatch {
                what: "census rows vs graph vertices",
                expected: n,
                actual: counts.len(),
            });
        }
        if n < 2 {
            return Err(Error::input("edge model needs at least 2 units"));
        }
        let width = counts.first().map_or(0, Vec::len);
        let mut adjacency = vec![false; n * n];
        for (u, v) in g.edges() {
            adjacency[u * n + v] = true;
            adjacency[v * n + u] = true;
        }
        let columns = (0..width)
            .map(|c| {
                let col: Vec<f64> = counts.iter().map(|r| r[c]).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                (sd > 1e-12).then(|| col.iter().map(|x| (x - mean) / sd).collect())
            })
            .collect();
        Ok(Self {
            n,
            adjacency,
            columns,
            edges: g.edge_count(),
        })
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn pairs(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Fits the model on the census columns in `active`. `warm` optionally
    /// supplies starting coefficients laid out like
    /// [`NetworkFit::coefficients`].
    pub fn fit(&self, active: &[usize], warm: Option<&[f64]>) -> Result<NetworkFit> {
        if let Some(&c) = active.iter().find(|&&c| c >= self.columns.len()) {
            return Err(Error::input(format!("census column {c} out of range")));
        }
        let used: Vec<usize> = active
            .iter()
            .enumerate()
            .filter(|(_, &c)| self.columns[c].is_some())
            .map(|(k, _)| k)
            .collect();
        let q = 1 + used.len();
        let n = self.n;
        let m = self.pairs() as f64;
        let e = self.edges as f64;
        let parameters = q;

        // unit design rows: [1/2, z_i...] so that row_i + row_j = [1, s_i + s_j]
        let mut s = DMatrix::<f64>::zeros(n, q);
        for i in 0..n {
            s[(i, 0)] = 0.5;
        }
        for (k, &pos) in used.iter().enumerate() {
            let col = self.columns[active[pos]].as_ref().expect("non-constant column");
            for i in 0..n {
                s[(i, k + 1)] = col[i];
            }
        }

        let mut beta = DVector::<f64>::zeros(q);
        match warm {
            Some(w) if w.len() == 1 + active.len() => {
                beta[0] = w[0];
                for (k, &pos) in used.iter().enumerate() {
                    beta[k + 1] = w[pos + 1];
                }
            }
            _ => {
                let p0 = (e / m).clamp(1e-9, 1.0 - 1e-9);
                beta[0] = (p0 / (1.0 - p0)).ln();
            }
        }
        if e == 0.0 || e == m {
            // the intercept diverges; report the saturated likelihood
            return Ok(self.finish(0.0, parameters, true, active, &used, &beta));
        }

        let penalized = |ll: f64, b: &DVector<f64>| ll - 0.5 * STABILIZER * b.rows(1, q - 1).norm_squared();
        let mut ll = self.log_likelihood(&s, &beta);
        let mut converged = false;
        for _ in 0..MAX_ITER {
            let a = &s * &beta;
            let mut row_r = DVector::<f64>::zeros(n);
            let mut row_w = DVector::<f64>::zeros(n);
            let mut w = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let p = sigmoid(a[i] + a[j]);
                    let y = if self.adjacency[i * n + j] { 1.0 } else { 0.0 };
                    let r = y - p;
                    let wij = p * (1.0 - p);
                    row_r[i] += r;
                    row_r[j] += r;
                    row_w[i] += wij;
                    row_w[j] += wij;
                    w[(i, j)] = wij;
                    w[(j, i)] = wij;
                }
            }
            let mut grad = s.transpose() * &row_r;
            let sw = DMatrix::from_fn(n, q, |i, k| row_w[i] * s[(i, k)]);
            let mut hess = s.transpose() * sw + s.transpose() * (&w * &s);
            for k in 1..q {
                grad[k] -= STABILIZER * beta[k];
                hess[(k, k)] += STABILIZER;
            }
            let step = match hess.cholesky() {
                Some(ch) => ch.solve(&grad),
                None => return Err(Error::Numerical("edge model Hessian is singular".into())),
            };
            // step halving keeps the penalized likelihood monotone
            let base = penalized(ll, &beta);
            let mut t = 1.0;
            let mut next = &beta + &step * t;
            let mut next_ll = self.log_likelihood(&s, &next);
            while penalized(next_ll, &next) < base - 1e-12 && t > 1e-6 {
                t *= 0.5;
                next = &beta + &step * t;
                next_ll = self.log_likelihood(&s, &next);
            }
            let change = (step.norm() * t) / (1.0 + beta.norm());
            beta = next;
            ll = next_ll;
            if change < TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("edge model did not converge in {MAX_ITER} iterations; using the last iterate");
        }
        Ok(self.finish(ll, parameters, converged, active, &used, &beta))
    }

    fn finish(
        &self,
        ll: f64,
        parameters: usize,
        converged: bool,
        active: &[usize],
        used: &[usize],
        beta: &DVector<f64>,
    ) -> NetworkFit {
        let mut coefficients = vec![0.0; 1 + active.len()];
        coefficients[0] = beta[0];
        for (k, &pos) in used.iter().enumerate() {
            coefficients[pos + 1] = beta[k + 1];
        }
        NetworkFit {
            aic: 2.0 * parameters as f64 - 2.0 * ll,
            log_likelihood: ll,
            parameters,
            converged,
            coefficients,
        }
    }

    fn log_likelihood(&self, s: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
        let a = s * beta;
        let n = self.n;
        let mut ll = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let eta = a[i] + a[j];
                // log sigmoid(eta) and log(1 - sigmoid(eta)), overflow safe
                ll += if self.adjacency[i * n + j] {
                    -softplus(-eta)
                } else {
                    -softplus(eta)
                };
            }
        }
        ll
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// AIC of the edge model on the census columns in `active`.
pub fn pe_network(g: &Graph, counts: &[Vec<f64>], active: &[usize]) -> Result<f64> {
    Ok(EdgeModel::new(g, counts)?.fit(active, None)?.aic)
}
