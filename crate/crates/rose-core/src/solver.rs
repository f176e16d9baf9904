//! Local M-estimation by damped Newton iteration and the per-machine
//! variance estimators the protocols transmit.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{self, factor_spd};
use crate::models::{shard_objective, DataShard, LossModel, ParamVector};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 50;

/// One machine's fitted state: the local minimizer and its sandwich-variance
/// diagonal (the entries transmitted under the Byzantine-center protocol).
#[derive(Debug, Clone)]
pub struct LocalFit {
    pub theta_hat: ParamVector,
    /// Sandwich-variance diagonal evaluated at `theta_hat` (divisor `n`).
    pub sigma_diag: Array1<f64>,
    pub iterations: usize,
    pub final_grad_norm: f64,
}

fn grad_norm(g: &Array1<f64>) -> f64 {
    g.dot(g).sqrt()
}

/// Minimize the shard objective by Newton steps with step-halving line
/// search; stops when the gradient norm drops to `tol`.
pub fn fit_local(
    shard: &DataShard,
    model: &LossModel,
    init: &ParamVector,
    tol: f64,
    max_iter: usize,
) -> Result<LocalFit> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("solver tolerance must be > 0, got {tol}")));
    }
    let mut theta = init.clone();
    let (mut f, mut g, mut h) = shard_objective(shard, model, &theta)?;
    let mut gnorm = grad_norm(&g);
    if gnorm <= tol {
        let sigma_diag = sandwich_variance_diag(shard, model, &theta)?;
        return Ok(LocalFit {
            theta_hat: theta,
            sigma_diag,
            iterations: 0,
            final_grad_norm: gnorm,
        });
    }
    for iter in 1..=max_iter {
        let step = factor_spd(&h)?.solve_vec(&g);
        let mut eta = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &theta - &step.map(|&s| eta * s);
            if let Ok((fc, gc, hc)) = shard_objective(shard, model, &candidate) {
                let gc_norm = grad_norm(&gc);
                // In the quadratic endgame the objective decrease drops below
                // f64 resolution before the gradient reaches the tolerance;
                // a candidate that already satisfies the stopping rule is
                // accepted without requiring a representable decrease.
                if gc_norm <= tol {
                    let sigma_diag = sandwich_variance_diag(shard, model, &candidate)?;
                    return Ok(LocalFit {
                        theta_hat: candidate,
                        sigma_diag,
                        iterations: iter,
                        final_grad_norm: gc_norm,
                    });
                }
                if fc < f {
                    accepted = Some((candidate, fc, gc, hc));
                    break;
                }
            }
            eta *= 0.5;
        }
        let Some((candidate, fc, gc, hc)) = accepted else {
            return Err(Error::NonConvergence {
                iterations: iter,
                grad_norm: gnorm,
            });
        };
        theta = candidate;
        f = fc;
        g = gc;
        h = hc;
        gnorm = grad_norm(&g);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        grad_norm: gnorm,
    })
}

/// Centered score second-moment matrix `(1/n) sum (grad_i - mean)^{x2}`.
fn centered_score_outer(
    shard: &DataShard,
    model: &LossModel,
    theta: &ParamVector,
    mean_grad: &Array1<f64>,
) -> Result<Array2<f64>> {
    let n = shard.n();
    let p = model.dim;
    let mut s = Array2::<f64>::zeros((p, p));
    for i in 0..n {
        let x = shard.covariates.row(i);
        let z = x.dot(theta);
        let (_, sc, _) = model.link_terms(z, shard.responses[i])?;
        for a in 0..p {
            let da = sc * x[a] - mean_grad[a];
            for b in a..p {
                let db = sc * x[b] - mean_grad[b];
                s[(a, b)] += da * db;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..p {
        for b in a..p {
            let v = s[(a, b)] * inv_n;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    Ok(s)
}

/// Uncentered score second-moment matrix `(1/n) sum grad_i^{x2}`; the middle
/// matrix of the plug-in covariance at a root.
pub fn score_outer_raw(
    shard: &DataShard,
    model: &LossModel,
    theta: &ParamVector,
) -> Result<Array2<f64>> {
    let zeros = Array1::<f64>::zeros(model.dim);
    centered_score_outer(shard, model, theta, &zeros)
}

/// Full sandwich matrix `H^{-1} S H^{-1}` with `S` the centered score
/// second moment, both evaluated on the shard at `theta`.
pub fn sandwich_matrix(
    shard: &DataShard,
    model: &LossModel,
    theta: &ParamVector,
) -> Result<Array2<f64>> {
    let (_, g, h) = shard_objective(shard, model, theta)?;
    let s = centered_score_outer(shard, model, theta, &g)?;
    let factor = factor_spd(&h)?;
    Ok(linalg::sandwich_with(&factor, &s))
}

/// Diagonal of the sandwich matrix; the same formula serves the central
/// estimator (at the median) and the per-machine transmitted estimator
/// (each machine at its own minimizer). Entries are clamped at zero against
/// rounding in degenerate shards.
pub fn sandwich_variance_diag(
    shard: &DataShard,
    model: &LossModel,
    theta: &ParamVector,
) -> Result<Array1<f64>> {
    let m = sandwich_matrix(shard, model, theta)?;
    Ok(m.diag().mapv(|v| v.max(0.0)))
}

/// Per-coordinate sample variance (divisor `n`) of the gradient entries.
pub fn gradient_entry_variances(
    shard: &DataShard,
    model: &LossModel,
    theta: &ParamVector,
) -> Result<Array1<f64>> {
    let (_, mean_grad, _) = shard_objective(shard, model, theta)?;
    let n = shard.n();
    let p = model.dim;
    let mut out = Array1::<f64>::zeros(p);
    for i in 0..n {
        let x = shard.covariates.row(i);
        let z = x.dot(theta);
        let (_, sc, _) = model.link_terms(z, shard.responses[i])?;
        for a in 0..p {
            let d = sc * x[a] - mean_grad[a];
            out[a] += d * d;
        }
    }
    out.mapv_inplace(|v| v / n as f64);
    Ok(out)
}

/// Entry-wise sample variance (divisor `n`) of the per-sample Hessians;
/// the output is exactly symmetric.
pub fn hessian_entry_variances(
    shard: &DataShard,
    model: &LossModel,
    theta: &ParamVector,
) -> Result<Array2<f64>> {
    let (_, _, mean_hess) = shard_objective(shard, model, theta)?;
    let n = shard.n();
    let p = model.dim;
    let mut out = Array2::<f64>::zeros((p, p));
    for i in 0..n {
        let x = shard.covariates.row(i);
        let z = x.dot(theta);
        let (_, _, w) = model.link_terms(z, shard.responses[i])?;
        for a in 0..p {
            let wxa = w * x[a];
            for b in a..p {
                let d = wxa * x[b] - mean_hess[(a, b)];
                out[(a, b)] += d * d;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..p {
        for b in a..p {
            let v = out[(a, b)] * inv_n;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}
