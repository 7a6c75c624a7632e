//! Symmetric eigendecomposition by cyclic Jacobi rotations and nearest
//! neighbor matching on eigenvector coordinates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{Graph, TreatmentVector};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with unit-norm eigenvectors as the
/// matching columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenSpectrum {
    pub fn of_graph(g: &Graph) -> Result<Self> {
        sym_eigen(&adjacency_matrix(g))
    }
}

pub fn adjacency_matrix(g: &Graph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.n(), g.n());
    for (u, v) in g.edges() {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    a
}

/// Full spectrum of a symmetric matrix.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<EigenSpectrum> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::input("matrix is not square"));
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::input("matrix is not symmetric"));
            }
        }
    }
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let frob = a.norm();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= 1e-14 * frob.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenSpectrum { values, vectors })
}

/// Which eigenvectors form the matching coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMode {
    /// The leading eigenvector only.
    First,
    /// Every eigenvector, the `k`-th weighted by `1/k`.
    All,
}

/// Result of nearest-control matching.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    /// `(treated, control)` pairs, one per treated unit.
    pub pairs: Vec<(usize, usize)>,
    pub estimate: f64,
}

/// Weighted squared distance between units in eigenvector coordinates.
#[derive(Debug, Clone)]
pub struct EigenMetric<'a> {
    spectrum: &'a EigenSpectrum,
    weights: Vec<f64>,
}

impl<'a> EigenMetric<'a> {
    /// Coordinate `k` is weighted by `1/(k+1)`, and by the inverse sample
    /// variance of the coordinate when `standardize` is set.
    pub fn new(spectrum: &'a EigenSpectrum, mode: EigenMode, standardize: bool) -> Self {
        let n = spectrum.vectors.nrows();
        let dims = match mode {
            EigenMode::First => 1.min(spectrum.vectors.ncols()),
            EigenMode::All => spectrum.vectors.ncols(),
        };
        let weights = (0..dims)
            .map(|k| {
                let col = spectrum.vectors.column(k);
                let sd = if standardize && n > 1 {
                    let mean = col.mean();
                    (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                let scale = if sd > 1e-12 { 1.0 / (sd * sd) } else { 1.0 };
                scale / (k + 1) as f64
            })
            .collect();
        Self { spectrum, weights }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let v = &self.spectrum.vectors;
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let d = v[(i, k)] - v[(j, k)];
                w * d * d
            })
            .sum()
    }
}

/// Matches each treated unit to its nearest control (controls reusable,
/// ties to the smallest index) and averages the outcome differences.
pub fn eigen_match(
    spectrum: &EigenSpectrum,
    y: &[f64],
    t: &TreatmentVector,
    mode: EigenMode,
    standardize: bool,
) -> Result<Pairing> {
    let n = t.len();
    if spectrum.vectors.nrows() != n || y.len() != n {
        return Err(Error::LengthMismatch {
            what: "eigenvector rows vs units",
            expected: n,
            actual: spectrum.vectors.nrows(),
        });
    }
    let metric = EigenMetric::new(spectrum, mode, standardize);
    nearest_control(y, t, |i, j| metric.distance(i, j))
}

/// Pairs each treated unit with the control minimizing `distance` and
/// returns the mean treated-minus-control outcome difference.
pub fn nearest_control(y: &[f64], t: &TreatmentVector, distance: impl Fn(usize, usize) -> f64) -> Result<Pairing> {
    let controls: Vec<usize> = (0..t.len()).filter(|&i| !t.is_treated(i)).collect();
    let treated: Vec<usize> = (0..t.len()).filter(|&i| t.is_treated(i)).collect();
    if controls.is_empty() || treated.is_empty() {
        return Err(Error::input("both arms must be nonempty"));
    }
    let pairs: Vec<(usize, usize)> = treated
        .iter()
        .map(|&i| {
            let mut best = controls[0];
            let mut best_d = distance(i, best);
            for &j in &controls[1..] {
                let d = distance(i, j);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            (i, best)
        })
        .collect();
    let estimate = pairs.iter().map(|&(i, j)| y[i] - y[j]).sum::<f64>() / pairs.len() as f64;
    Ok(Pairing { pairs, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn small_spectra() {
        let k2 = EigenSpectrum::of_graph(&Graph::complete(2)).unwrap();
        assert_abs_diff_eq!(k2.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k2.values[1], -1.0, epsilon = 1e-12);
        let k3 = EigenSpectrum::of_graph(&Graph::complete(3)).unwrap();
        for (got, want) in k3.values.iter().zip([2.0, -1.0, -1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let e = EigenSpectrum::of_graph(&Graph::empty(4)).unwrap();
        assert!(e.values.iter().all(|&x| x == 0.0));
        assert_eq!(e.vectors, DMatrix::identity(4, 4));
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(sym_eigen(&a).is_err());
    }

    #[test]
    fn isolated_pairs_match_within_pair() {
        // edges 0-1 and 2-3 with different weights so the eigenvectors
        // separate the pairs
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 0.0,
            ],
        );
        let s = sym_eigen(&a).unwrap();
        let t = TreatmentVector::from_indicators(&[1, 0, 1, 0]).unwrap();
        let y = [3.0, 1.0, 10.0, 6.0];
        let p = eigen_match(&s, &y, &t, EigenMode::All, true).unwrap();
        assert_eq!(p.pairs, vec![(0, 1), (2, 3)]);
        assert_abs_diff_eq!(p.estimate, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn one_control_means_modes_agree() {
        let g = Graph::path(2);
        let s = EigenSpectrum::of_graph(&g).unwrap();
        let t = TreatmentVector::from_indicators(&[1, 0]).unwrap();
        let y = [4.0, 1.0];
        let first = eigen_match(&s, &y, &t, EigenMode::First, true).unwrap();
        let all = eigen_match(&s, &y, &t, EigenMode::All, true).unwrap();
        assert_eq!(first, all);
        assert_eq!(first.estimate, 3.0);
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(proptest::bool::weighted(0.2), n * (n - 1) / 2).prop_map(move |mask| {
                let mut edges = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if mask[k] {
                            edges.push((i, j));
                        }
                        k += 1;
                    }
                }
                Graph::new(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn reconstruction_and_orthonormality(g in arb_graph(50)) {
            let a = adjacency_matrix(&g);
            let s = sym_eigen(&a).unwrap();
            let recon = &s.vectors * DMatrix::from_diagonal(&s.values) * s.vectors.transpose();
            prop_assert!((&a - recon).norm() / (1.0 + a.norm()) < 1e-8);
            let gram = s.vectors.transpose() * &s.vectors;
            prop_assert!((gram - DMatrix::identity(g.n(), g.n())).norm() < 1e-8);
            for w in s.values.as_slice().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            // eigenvalues agree with an independent symmetric solver
            let mut oracle: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
            oracle.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in s.values.iter().zip(&oracle) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }

        #[test]
        fn sign_flips_do_not_change_matches(g in arb_graph(20), flips in proptest::collection::vec(any::<bool>(), 20), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let n = g.n();
            prop_assume!(n >= 2);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            bits[0] = true;
            bits[1] = false;
            let t = TreatmentVector::new(bits);
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = EigenSpectrum::of_graph(&g).unwrap();
            let mut flipped = s.clone();
            for (k, _) in flips.iter().enumerate().take(n).filter(|(_, &f)| f) {
                let col = -flipped.vectors.column(k);
                flipped.vectors.set_column(k, &col);
            }
            for mode in [EigenMode::First, EigenMode::All] {
                let a = eigen_match(&s, &y, &t, mode, true).unwrap();
                let b = eigen_match(&flipped, &y, &t, mode, true).unwrap();
                prop_assert!((a.estimate - b.estimate).abs() < 1e-9);
            }
        }
    }
}
