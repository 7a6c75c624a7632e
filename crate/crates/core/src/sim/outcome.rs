//! Outcome generation.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::graph::{Graph, TreatmentVector};
use crate::interference::{compute_components, zscore_normalize, CentralityScope, Component, ComponentMatrix};

use super::config::{AdeTarget, Interference, Noise, OutcomeModel};

/// One draw of outcomes with the quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcomes {
    pub y: Vec<f64>,
    pub tau: Vec<f64>,
    /// Interference value of each unit.
    pub interference: Vec<f64>,
    pub covariate: Option<Vec<i64>>,
    pub true_ade: f64,
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    Normal::new(mean, sd).map_err(|e| Error::input(format!("invalid normal distribution: {e}")))
}

fn maybe_zscore(m: ComponentMatrix, zscore: bool) -> Result<ComponentMatrix> {
    if zscore {
        zscore_normalize(&m)
    } else {
        Ok(m)
    }
}

/// Interference value of every unit.
pub fn interference_values(
    kind: &Interference,
    g: &Graph,
    t: &TreatmentVector,
    scope: CentralityScope,
) -> Result<Vec<f64>> {
    let n = g.n();
    match kind {
        Interference::None => Ok(vec![0.0; n]),
        Interference::Additive { weights, zscore } => {
            if weights.len() != Component::STANDARD.len() {
                return Err(Error::LengthMismatch {
                    what: "additive interference weights",
                    expected: Component::STANDARD.len(),
                    actual: weights.len(),
                });
            }
            let m = maybe_zscore(compute_components(g, t, &Component::STANDARD, scope)?, *zscore)?;
            Ok(m.rows
                .iter()
                .map(|r| r.iter().zip(weights).map(|(x, w)| x * w).sum())
                .collect())
        }
        Interference::Multiplicative {
            components,
            scale,
            zscore,
        } => {
            let m = maybe_zscore(compute_components(g, t, components, scope)?, *zscore)?;
            Ok(m.rows.iter().map(|r| scale * r.iter().product::<f64>()).collect())
        }
        Interference::Misspecified { gamma, zscore } => {
            let pruned = g.filter_edges(|u, v| t.is_treated(u) || t.is_treated(v));
            let m = compute_components(&pruned, t, &[Component::Degree, Component::Triangles], scope)?;
            let m = maybe_zscore(m, *zscore)?;
            Ok(m.rows.iter().map(|r| (5.0 - gamma) * r[0] + gamma * r[1]).collect())
        }
    }
}

/// Draws `Y_i = t_i tau_i + f_i + beta x_i + e_i`.
pub fn gen_outcomes<R: Rng + ?Sized>(
    model: &OutcomeModel,
    g: &Graph,
    t: &TreatmentVector,
    rng: &mut R,
) -> Result<Outcomes> {
    t.check_against(g)?;
    let n = g.n();
    let interference = interference_values(&model.interference, g, t, model.centrality)?;
    let tau_dist = normal(model.tau_mean, model.tau_sd)?;
    let tau: Vec<f64> = (0..n).map(|_| tau_dist.sample(rng)).collect();
    let covariate = match &model.covariate {
        Some(term) if term.levels.is_empty() => return Err(Error::input("covariate needs at least one level")),
        Some(term) => Some(
            (0..n)
                .map(|_| term.levels[rng.random_range(0..term.levels.len())])
                .collect::<Vec<_>>(),
        ),
        None => None,
    };
    let noise: Vec<f64> = match model.noise {
        Noise::Homoskedastic { sd } => {
            let d = normal(0.0, sd)?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Noise::Heteroskedastic => {
            let var = Uniform::new(0.0f64, 1.0).map_err(|e| Error::input(e.to_string()))?;
            (0..n)
                .map(|_| {
                    let sd = var.sample(rng).sqrt();
                    sd * rng.sample::<f64, _>(rand_distr::StandardNormal)
                })
                .collect()
        }
    };
    let beta = model.covariate.as_ref().map_or(0.0, |c| c.beta);
    let y = (0..n)
        .map(|i| {
            let direct = if t.is_treated(i) { tau[i] } else { 0.0 };
            let cov = covariate.as_ref().map_or(0.0, |x| beta * x[i] as f64);
            direct + interference[i] + cov + noise[i]
        })
        .collect();
    let true_ade = match model.target {
        AdeTarget::Realized if n > 0 => tau.iter().sum::<f64>() / n as f64,
        _ => model.tau_mean,
    };
    Ok(Outcomes {
        y,
        tau,
        interference,
        covariate,
        true_ade,
    })
}
