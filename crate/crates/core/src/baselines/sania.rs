//! Minimum integrated-variance linear unbiased estimator under symmetric
//! neighborhood interference with additive main effects, for independent
//! Bernoulli(p) treatment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{treated_degree, Graph, TreatmentVector};

/// Which closed form of the weights to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaniaFormula {
    /// `w_i = C(d_i, d_i^z) [z_i/(np) - (1-z_i)/(n(1-p))] / S_i` with
    /// `S_i = sum_d C(d_i, d)^2 p^d (1-p)^(d_i-d)`. Unbiased.
    #[default]
    Unbiased,
    /// The same expression without the leading binomial factor. It agrees
    /// with the unbiased form when `d_i^z` is `0` or `d_i`.
    Reduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaniaWeights {
    pub weights: Vec<f64>,
    pub p: f64,
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `sum_{d=0}^{deg} C(deg, d)^2 p^d (1-p)^(deg-d)`.
fn normalizer(deg: usize, p: f64) -> f64 {
    (0..=deg)
        .map(|d| binom(deg, d).powi(2) * p.powi(d as i32) * (1.0 - p).powi((deg - d) as i32))
        .sum()
}

/// Weight of one unit with degree `deg`, treated degree `treated_deg` and
/// own treatment `z`, among `n` units.
pub fn sania_weight(n: usize, deg: usize, treated_deg: usize, z: bool, p: f64, formula: SaniaFormula) -> f64 {
    let arm = if z {
        1.0 / (n as f64 * p)
    } else {
        -1.0 / (n as f64 * (1.0 - p))
    };
    let lead = match formula {
        SaniaFormula::Unbiased => binom(deg, treated_deg),
        SaniaFormula::Reduced => 1.0,
    };
    lead * arm / normalizer(deg, p)
}

pub fn sania_weights(g: &Graph, z: &TreatmentVector, p: f64, formula: SaniaFormula) -> Result<SaniaWeights> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::input("treatment probability must lie strictly between 0 and 1"));
    }
    z.check_against(g)?;
    let n = g.n();
    let weights = (0..n)
        .map(|i| sania_weight(n, g.degree(i), treated_degree(g, z, i), z.is_treated(i), p, formula))
        .collect();
    Ok(SaniaWeights { weights, p })
}

pub fn sania_estimate(weights: &SaniaWeights, y: &[f64]) -> Result<f64> {
    if weights.weights.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "weights vs outcomes",
            expected: weights.weights.len(),
            actual: y.len(),
        });
    }
    Ok(weights.weights.iter().zip(y).map(|(w, y)| w * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_derived_weights() {
        let u = SaniaFormula::Unbiased;
        assert_abs_diff_eq!(sania_weight(4, 1, 0, true, 0.5, u), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sania_weight(4, 1, 1, false, 0.5, u), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sania_weight(4, 2, 0, true, 0.5, u), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sania_weight(4, 2, 1, true, 0.5, u), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            sania_weight(4, 2, 1, true, 0.5, SaniaFormula::Reduced),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(sania_weight(4, 0, 0, false, 0.25, u), -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dot_product_estimate() {
        let w = SaniaWeights {
            weights: vec![0.5, -0.5],
            p: 0.5,
        };
        assert_abs_diff_eq!(sania_estimate(&w, &[7.0, 3.0]).unwrap(), 2.0);
        assert_eq!(sania_estimate(&w, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(sania_estimate(&w, &[1.0]).is_err());
    }

    #[test]
    fn isolated_units_reduce_to_horvitz_thompson() {
        let g = Graph::empty(4);
        let z = TreatmentVector::from_indicators(&[1, 1, 0, 1]).unwrap();
        let p = 0.75;
        let w = sania_weights(&g, &z, p, SaniaFormula::Unbiased).unwrap();
        let tau = 2.0;
        let y: Vec<f64> = z.as_slice().iter().map(|&b| if b { tau } else { 0.0 }).collect();
        // 3 treated units, each weighted 1/(np)
        assert_abs_diff_eq!(sania_estimate(&w, &y).unwrap(), 3.0 * tau / (4.0 * p), epsilon = 1e-12);
        assert!(sania_weights(&g, &z, 1.0, SaniaFormula::Unbiased).is_err());
        assert!(sania_weights(&g, &z, 0.0, SaniaFormula::Unbiased).is_err());
    }

    /// Exact expectation over every treatment vector of a small graph.
    fn exact_mean(g: &Graph, p: f64, alpha: &[f64], tau: &[f64], formula: SaniaFormula) -> f64 {
        let n = g.n();
        let mut mean = 0.0;
        for mask in 0u32..(1 << n) {
            let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let k = bits.iter().filter(|&&b| b).count() as i32;
            let prob = p.powi(k) * (1.0 - p).powi(n as i32 - k);
            let z = TreatmentVector::new(bits);
            let y: Vec<f64> = (0..n)
                .map(|i| alpha[i] + if z.is_treated(i) { tau[i] } else { 0.0 })
                .collect();
            let w = sania_weights(g, &z, p, formula).unwrap();
            mean += prob * sania_estimate(&w, &y).unwrap();
        }
        mean
    }

    #[test]
    fn exact_expectation_is_unbiased() {
        let g = Graph::new(6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]).unwrap();
        let alpha = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let tau = [5.0, 4.0, 6.0, 5.5, 4.5, 5.0];
        let target = tau.iter().sum::<f64>() / 6.0;
        let unbiased = exact_mean(&g, 0.4, &alpha, &tau, SaniaFormula::Unbiased);
        assert_abs_diff_eq!(unbiased, target, epsilon = 1e-10);
        let reduced = exact_mean(&g, 0.4, &alpha, &tau, SaniaFormula::Reduced);
        assert!((reduced - target).abs() > 1e-3);
    }
}
