//! VRMOL aggregation of parameters, gradients and Hessians, the one-step
//! Newton correction, the variance-reduced covariance matrix and confidence
//! intervals, and the two end-to-end protocols over a cluster.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::kernels::{
    bivariate_normal_cdf, coordinate_median, normal_quantile, vrmol_scalar, QuantileGrid,
};
use crate::linalg::{self, factor_spd};
use crate::models::ParamVector;
use crate::report::LocalReport;
use crate::simnet::{
    broadcast_collect, credit_broadcast, Algorithm, Cluster, CommLedger, Request,
};
use crate::solver::{
    gradient_entry_variances, hessian_entry_variances, sandwich_variance_diag, score_outer_raw,
};

/// Robust aggregates of the per-machine derivatives, built entry by entry
/// from the upper triangle so the Hessian is exactly symmetric.
#[derive(Debug, Clone)]
pub struct AggregatedDerivatives {
    pub gradient: Array1<f64>,
    pub hessian: Array2<f64>,
}

/// Final estimate of one protocol run with its plug-in covariance and the
/// communication ledger.
#[derive(Debug, Clone)]
pub struct RoseEstimate {
    /// One-step corrected parameter vector.
    pub theta: ParamVector,
    /// Robust initial value the correction started from.
    pub initial: ParamVector,
    /// Aggregated gradient and Hessian at `initial`.
    pub derivatives: AggregatedDerivatives,
    /// Plug-in estimate of the kernel's limiting covariance.
    pub sigma_vr: Array2<f64>,
    pub grid: QuantileGrid,
    pub algorithm: Algorithm,
    pub comm: CommLedger,
}

/// Where the per-entry scales of the gradient aggregation come from.
pub enum GradientScale<'a> {
    /// Entry variances computed on the central shard (honest center).
    Central(&'a Array1<f64>),
    /// Median over machines of the transmitted entry variances.
    MedianOfVariances,
}

/// Where the per-entry scales of the Hessian aggregation come from.
pub enum HessianScale<'a> {
    Central(&'a Array2<f64>),
    MedianOfVariances,
}

fn check_lengths(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Apply the variance-reduced median coordinate-wise to the local estimates;
/// `scale[l]` is the per-coordinate standard deviation, scaled down by
/// `sqrt(n)` to the sampling deviation of one local estimate.
pub fn vrmol_parameter(
    theta_hats: &[ParamVector],
    scale: &Array1<f64>,
    n: usize,
    grid: &QuantileGrid,
) -> Result<ParamVector> {
    if theta_hats.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = theta_hats[0].len();
    check_lengths(p, scale.len())?;
    for t in theta_hats {
        check_lengths(p, t.len())?;
    }
    let sqrt_n = (n as f64).sqrt();
    let mut out = Array1::<f64>::zeros(p);
    let mut column = vec![0.0; theta_hats.len()];
    for l in 0..p {
        for (j, t) in theta_hats.iter().enumerate() {
            column[j] = t[l];
        }
        let sd = scale[l].max(0.0) / sqrt_n;
        out[l] = vrmol_scalar(&column, sd, grid)?;
    }
    Ok(out)
}

fn median_of<F: Fn(&LocalReport) -> Result<f64>>(reports: &[LocalReport], f: F) -> Result<f64> {
    let mut values = Vec::with_capacity(reports.len());
    for r in reports {
        values.push(f(r)?);
    }
    coordinate_median(&values)
}

/// Entry-wise variance-reduced median of the transmitted gradients.
pub fn vrmol_gradient(
    reports: &[LocalReport],
    scale: GradientScale<'_>,
    n: usize,
    grid: &QuantileGrid,
) -> Result<Array1<f64>> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = reports[0].require_gradient()?.len();
    if let GradientScale::Central(v) = &scale {
        check_lengths(p, v.len())?;
    }
    let sqrt_n = (n as f64).sqrt();
    let mut out = Array1::<f64>::zeros(p);
    let mut column = vec![0.0; reports.len()];
    for l in 0..p {
        for (j, r) in reports.iter().enumerate() {
            let g = r.require_gradient()?;
            check_lengths(p, g.len())?;
            column[j] = g[l];
        }
        let var = match &scale {
            GradientScale::Central(v) => v[l],
            GradientScale::MedianOfVariances => {
                median_of(reports, |r| Ok(r.require_grad_vars()?[l]))?
            }
        };
        let sd = var.max(0.0).sqrt() / sqrt_n;
        out[l] = vrmol_scalar(&column, sd, grid)?;
    }
    Ok(out)
}

/// Entry-wise variance-reduced median of the transmitted Hessians; entries
/// with `l1 <= l2` are aggregated and mirrored, so the output is exactly
/// symmetric even under asymmetric corrupted reports.
pub fn vrmol_hessian(
    reports: &[LocalReport],
    scale: HessianScale<'_>,
    n: usize,
    grid: &QuantileGrid,
) -> Result<Array2<f64>> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = reports[0].require_hessian()?.nrows();
    let sqrt_n = (n as f64).sqrt();
    let mut out = Array2::<f64>::zeros((p, p));
    let mut column = vec![0.0; reports.len()];
    for l1 in 0..p {
        for l2 in l1..p {
            for (j, r) in reports.iter().enumerate() {
                let h = r.require_hessian()?;
                check_lengths(p, h.nrows())?;
                column[j] = h[(l1, l2)];
            }
            let var = match &scale {
                HessianScale::Central(v) => v[(l1, l2)],
                HessianScale::MedianOfVariances => {
                    median_of(reports, |r| Ok(r.require_hess_vars()?[(l1, l2)]))?
                }
            };
            let sd = var.max(0.0).sqrt() / sqrt_n;
            let value = vrmol_scalar(&column, sd, grid)?;
            out[(l1, l2)] = value;
            out[(l2, l1)] = value;
        }
    }
    Ok(out)
}

/// Single Newton correction `theta - H^{-1} g` by an exact symmetric solve.
pub fn one_step(
    theta: &ParamVector,
    gradient: &Array1<f64>,
    hessian: &Array2<f64>,
) -> Result<ParamVector> {
    check_lengths(theta.len(), gradient.len())?;
    check_lengths(theta.len(), hessian.nrows())?;
    let step = factor_spd(hessian)?.solve_vec(gradient);
    Ok(theta - &step)
}

/// Limiting covariance of the variance-reduced kernel built from a sandwich
/// matrix estimate: the diagonal is inflated by `D_K`, off-diagonals come
/// from bivariate-normal orthant probabilities at the sandwich correlations.
pub fn sigma_vr_matrix(sandwich: &Array2<f64>, grid: &QuantileGrid) -> Result<Array2<f64>> {
    let p = sandwich.nrows();
    check_lengths(p, sandwich.ncols())?;
    let mut sd = Vec::with_capacity(p);
    for l in 0..p {
        let v = sandwich[(l, l)];
        if !(v > 0.0) {
            return Err(Error::Domain(format!(
                "sandwich diagonal must be positive, entry {l} is {v}"
            )));
        }
        sd.push(v.sqrt());
    }
    let psi_sum_sq = grid.psi_sum() * grid.psi_sum();
    let mut out = Array2::<f64>::zeros((p, p));
    for l in 0..p {
        out[(l, l)] = grid.d_constant() * sandwich[(l, l)];
    }
    for l1 in 0..p {
        for l2 in (l1 + 1)..p {
            let rho = (sandwich[(l1, l2)] / (sd[l1] * sd[l2])).clamp(-1.0, 1.0);
            let value = if rho == 0.0 {
                0.0
            } else {
                let mut acc = 0.0;
                for (k1, &d1) in grid.deltas().iter().enumerate() {
                    for (k2, &d2) in grid.deltas().iter().enumerate() {
                        let joint = bivariate_normal_cdf(d1, d2, rho)?;
                        acc += joint - grid.kappas()[k1] * grid.kappas()[k2];
                    }
                }
                acc / psi_sum_sq * sd[l1] * sd[l2]
            };
            out[(l1, l2)] = value;
            out[(l2, l1)] = value;
        }
    }
    Ok(out)
}

/// Two-sided normal confidence interval for `v' theta*` at confidence
/// `level = 1 - alpha`, using the estimate's plug-in covariance.
pub fn confidence_interval(
    estimate: &RoseEstimate,
    v: &Array1<f64>,
    level: f64,
    m: usize,
    n: usize,
) -> Result<(f64, f64)> {
    let p = estimate.theta.len();
    check_lengths(p, v.len())?;
    let norm = v.dot(v).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("direction must be a unit vector, |v| = {norm}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level must lie in (0,1), got {level}")));
    }
    let z = normal_quantile(0.5 * (1.0 + level))?;
    let quad = v.dot(&estimate.sigma_vr.dot(v)).max(0.0);
    let half = z * (quad / (m as f64 * n as f64)).sqrt();
    let center = v.dot(&estimate.theta);
    Ok((center - half, center + half))
}

fn collect_theta_hats(reports: &[LocalReport]) -> Result<Vec<ParamVector>> {
    reports
        .iter()
        .map(|r| Ok(r.require_theta()?.clone()))
        .collect()
}

/// Honest-center protocol: local fits, a variance-reduced initial value with
/// central-shard scales, one more derivative round, and a single Newton
/// correction. Assumes the central machine and its data are trustworthy.
pub fn run_algorithm1(cluster: &Cluster, grid: &QuantileGrid) -> Result<RoseEstimate> {
    let model = cluster.model();
    let p = model.dim;
    let n = cluster.local_n();
    let m = cluster.machines();
    let mut ledger = CommLedger::new();

    let fit_reports = broadcast_collect(cluster, &Request::Fit, Algorithm::One, &mut ledger)?;
    let theta_hats = collect_theta_hats(&fit_reports)?;

    let mut theta_med = Array1::<f64>::zeros(p);
    let mut column = vec![0.0; theta_hats.len()];
    for l in 0..p {
        for (j, t) in theta_hats.iter().enumerate() {
            column[j] = t[l];
        }
        theta_med[l] = coordinate_median(&column)?;
    }

    let center = cluster.center_shard()?;
    let sigma2_central = sandwich_variance_diag(center, model, &theta_med)
        .map_err(|e| e.at_machine(1))?;
    let scale_sd = sigma2_central.mapv(|v| v.max(0.0).sqrt());
    let theta_vr = vrmol_parameter(&theta_hats, &scale_sd, n, grid)?;

    credit_broadcast(&mut ledger, m, p, 2);
    let deriv_reports = broadcast_collect(
        cluster,
        &Request::DerivativesAt(theta_vr.clone()),
        Algorithm::One,
        &mut ledger,
    )?;
    let grad_vars_central =
        gradient_entry_variances(center, model, &theta_vr).map_err(|e| e.at_machine(1))?;
    let hess_vars_central =
        hessian_entry_variances(center, model, &theta_vr).map_err(|e| e.at_machine(1))?;
    let gradient = vrmol_gradient(
        &deriv_reports,
        GradientScale::Central(&grad_vars_central),
        n,
        grid,
    )?;
    let hessian = vrmol_hessian(
        &deriv_reports,
        HessianScale::Central(&hess_vars_central),
        n,
        grid,
    )?;
    let theta = one_step(&theta_vr, &gradient, &hessian)?;

    // Plug-in covariance: aggregated-Hessian sandwich around the central
    // shard's raw score second moment at the corrected estimate.
    let middle = score_outer_raw(center, model, &theta).map_err(|e| e.at_machine(1))?;
    let factor = factor_spd(&hessian)?;
    let sandwich = linalg::sandwich_with(&factor, &middle);
    let sigma_vr = sigma_vr_matrix(&sandwich, grid)?;

    Ok(RoseEstimate {
        theta,
        initial: theta_vr,
        derivatives: AggregatedDerivatives { gradient, hessian },
        sigma_vr,
        grid: grid.clone(),
        algorithm: Algorithm::One,
        comm: ledger,
    })
}

/// Byzantine-center protocol: machines additionally transmit variance
/// estimators and every scale becomes a median over machines, so nothing
/// depends on the central shard. Node-to-center traffic is exactly twice
/// that of the honest-center protocol.
pub fn run_algorithm2(cluster: &Cluster, grid: &QuantileGrid) -> Result<RoseEstimate> {
    let model = cluster.model();
    let p = model.dim;
    let n = cluster.local_n();
    let m = cluster.machines();
    let mut ledger = CommLedger::new();

    let fit_reports = broadcast_collect(cluster, &Request::Fit, Algorithm::Two, &mut ledger)?;
    let theta_hats = collect_theta_hats(&fit_reports)?;

    // median-filter the transmitted variances, then clamp; corrupted reports
    // may carry negative entries
    let mut scale_sd = Array1::<f64>::zeros(p);
    let mut sandwich_diag = Array1::<f64>::zeros(p);
    for l in 0..p {
        let med = median_of(&fit_reports, |r| Ok(r.require_sigma_diag()?[l]))?;
        sandwich_diag[l] = med.max(0.0);
        scale_sd[l] = sandwich_diag[l].sqrt();
    }
    let theta_vr = vrmol_parameter(&theta_hats, &scale_sd, n, grid)?;

    credit_broadcast(&mut ledger, m, p, 2);
    let deriv_reports = broadcast_collect(
        cluster,
        &Request::DerivativesAt(theta_vr.clone()),
        Algorithm::Two,
        &mut ledger,
    )?;
    let gradient = vrmol_gradient(&deriv_reports, GradientScale::MedianOfVariances, n, grid)?;
    let hessian = vrmol_hessian(&deriv_reports, HessianScale::MedianOfVariances, n, grid)?;
    let theta = one_step(&theta_vr, &gradient, &hessian)?;

    // Covariance without trusting the center: the median over machines of
    // the transmitted sandwich diagonals estimates the marginal variances;
    // cross-coordinate score moments are never transmitted on this wire, so
    // the plug-in keeps only the diagonal (coordinate-wise intervals).
    let mut sandwich = Array2::<f64>::zeros((p, p));
    for l in 0..p {
        sandwich[(l, l)] = sandwich_diag[l];
    }
    let sigma_vr = sigma_vr_matrix(&sandwich, grid)?;

    Ok(RoseEstimate {
        theta,
        initial: theta_vr,
        derivatives: AggregatedDerivatives { gradient, hessian },
        sigma_vr,
        grid: grid.clone(),
        algorithm: Algorithm::Two,
        comm: ledger,
    })
}
