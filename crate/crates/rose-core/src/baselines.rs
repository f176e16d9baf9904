//! Non-robust and median-only reference estimators used in the benchmarks.
//! Baselines consume the same report stream as the robust protocols,
//! corrupted entries included.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::kernels::coordinate_median;
use crate::models::ParamVector;
use crate::rose::one_step;
use crate::simnet::{broadcast_collect, Algorithm, Cluster, CommLedger, Request};

/// Plain coordinate-wise mean of the local estimates.
pub fn average_estimator(theta_hats: &[ParamVector]) -> Result<ParamVector> {
    if theta_hats.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = theta_hats[0].len();
    let mut out = Array1::<f64>::zeros(p);
    for t in theta_hats {
        if t.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: t.len() });
        }
        out += t;
    }
    out.mapv_inplace(|v| v / theta_hats.len() as f64);
    Ok(out)
}

fn fit_thetas(cluster: &Cluster, ledger: &mut CommLedger) -> Result<Vec<ParamVector>> {
    let reports = broadcast_collect(cluster, &Request::Fit, Algorithm::One, ledger)?;
    reports
        .iter()
        .map(|r| Ok(r.require_theta()?.clone()))
        .collect()
}

fn mean_derivatives(
    cluster: &Cluster,
    at: &ParamVector,
    ledger: &mut CommLedger,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let reports = broadcast_collect(
        cluster,
        &Request::DerivativesAt(at.clone()),
        Algorithm::One,
        ledger,
    )?;
    let p = at.len();
    let m = reports.len() as f64;
    let mut g = Array1::<f64>::zeros(p);
    let mut h = Array2::<f64>::zeros((p, p));
    for r in &reports {
        g += r.require_gradient()?;
        h += r.require_hessian()?;
    }
    g.mapv_inplace(|v| v / m);
    h.mapv_inplace(|v| v / m);
    Ok((g, h))
}

/// Average init, average gradient and Hessian, one Newton step. Non-robust:
/// corrupted reports enter every average.
pub fn one_step_average(cluster: &Cluster) -> Result<ParamVector> {
    let mut ledger = CommLedger::new();
    let thetas = fit_thetas(cluster, &mut ledger)?;
    let init = average_estimator(&thetas)?;
    let (g, h) = mean_derivatives(cluster, &init, &mut ledger)?;
    one_step(&init, &g, &h)
}

/// One-step correction built entirely from coordinate-wise medians: median
/// init, entry-wise median gradient and Hessian at it.
pub fn rose_med(cluster: &Cluster) -> Result<ParamVector> {
    let mut ledger = CommLedger::new();
    let thetas = fit_thetas(cluster, &mut ledger)?;
    let p = thetas[0].len();
    let mut init = Array1::<f64>::zeros(p);
    let mut column = vec![0.0; thetas.len()];
    for l in 0..p {
        for (j, t) in thetas.iter().enumerate() {
            column[j] = t[l];
        }
        init[l] = coordinate_median(&column)?;
    }
    let reports = broadcast_collect(
        cluster,
        &Request::DerivativesAt(init.clone()),
        Algorithm::One,
        &mut ledger,
    )?;
    let mut g = Array1::<f64>::zeros(p);
    let mut h = Array2::<f64>::zeros((p, p));
    let mut col = vec![0.0; reports.len()];
    for l in 0..p {
        for (j, r) in reports.iter().enumerate() {
            col[j] = r.require_gradient()?[l];
        }
        g[l] = coordinate_median(&col)?;
    }
    for l1 in 0..p {
        for l2 in l1..p {
            for (j, r) in reports.iter().enumerate() {
                col[j] = r.require_hessian()?[(l1, l2)];
            }
            let v = coordinate_median(&col)?;
            h[(l1, l2)] = v;
            h[(l2, l1)] = v;
        }
    }
    one_step(&init, &g, &h)
}
