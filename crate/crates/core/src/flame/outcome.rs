//! Outcome prediction error: ridge regression of the outcome on one-hot
//! encoded matching columns plus an unpenalized intercept and treatment
//! indicator, scored by leave-one-out squared error on the holdout units.
//!
//! The fit is done in dual form. With `Z` the one-hot design, `Z Z^T` has
//! entry `(a, b)` equal to the number of active columns on which units `a`
//! and `b` agree, so the one-hot matrix is never built. For
//! `K = Z Z^T + lambda I` and unpenalized block `U = [1, t]`, the residual
//! maker is `lambda P` with `P = K^-1 - K^-1 U (U^T K^-1 U)^-1 U^T K^-1`, and
//! the leave-one-out residual of unit `a` is `(P y)_a / P_aa`.

use nalgebra::{DMatrix, DVector};

use crate::census::FeatureTable;
use crate::error::{Error, Result};

/// Floor applied to the ridge penalty so that `lambda = 0` behaves as the
/// vanishing-penalty limit.
const MIN_PENALTY: f64 = 1e-8;

/// Leave-one-out sum of squared errors of the ridge fit on `rows`, using
/// the columns listed in `active`.
pub fn pe_outcome(
    features: &FeatureTable,
    rows: &[usize],
    y: &[f64],
    treated: &[bool],
    active: &[usize],
    ridge_penalty: f64,
) -> Result<f64> {
    if ridge_penalty.is_nan() || ridge_penalty < 0.0 {
        return Err(Error::input("ridge penalty must be nonnegative"));
    }
    let h = rows.len();
    if h < 3 {
        return Err(Error::input("outcome model needs at least 3 holdout units"));
    }
    let lambda = ridge_penalty.max(MIN_PENALTY);
    let mut k = DMatrix::<f64>::zeros(h, h);
    for a in 0..h {
        let ra = features.row(rows[a]);
        for b in a..h {
            let rb = features.row(rows[b]);
            let agree = active.iter().filter(|&&c| ra[c] == rb[c]).count() as f64;
            k[(a, b)] = agree;
            k[(b, a)] = agree;
        }
        k[(a, a)] += lambda;
    }
    let mut u = DMatrix::<f64>::zeros(h, 2);
    let mut yv = DVector::<f64>::zeros(h);
    for (a, &r) in rows.iter().enumerate() {
        u[(a, 0)] = 1.0;
        u[(a, 1)] = if treated[r] { 1.0 } else { 0.0 };
        yv[a] = y[r];
    }
    let kinv = invert_spd(k)?;
    let kinv_u = &kinv * &u;
    let utku = u.transpose() * &kinv_u;
    let p = match utku.clone().try_inverse() {
        Some(inv) => &kinv - &kinv_u * inv * kinv_u.transpose(),
        // treatment constant on the holdout: only the intercept is free
        None => {
            let ku = kinv_u.column(0).into_owned();
            let s = utku[(0, 0)];
            &kinv - &ku * ku.transpose() / s
        }
    };
    let py = &p * &yv;
    let mut sse = 0.0;
    for a in 0..h {
        let paa = p[(a, a)];
        let r = if paa > 1e-12 * lambda.recip().max(1.0) {
            py[a] / paa
        } else {
            // leaving this unit out makes the fit undetermined; fall back
            // to its in-sample residual
            lambda * py[a]
        };
        sse += r * r;
    }
    Ok(sse)
}

fn invert_spd(k: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    let scale = k.diagonal().max().max(1.0);
    let mut jitter = 0.0;
    for _ in 0..8 {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.inverse());
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    Err(Error::Numerical("ridge kernel is not positive definite".into()))
}
