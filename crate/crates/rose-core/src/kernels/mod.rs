//! Robust scalar aggregation kernels and the quantile grid they share.

mod bvn;
mod normal;

pub use bvn::bivariate_normal_cdf;
pub use normal::{normal_quantile, std_normal, std_normal_cdf, std_normal_pdf};

use crate::error::{Error, Result};

/// The `K` quantile levels, their normal quantiles and density weights, and
/// the variance-inflation constant `D_K` derived from them.
///
/// Immutable after construction; shared freely across threads.
#[derive(Debug, Clone)]
pub struct QuantileGrid {
    k: usize,
    kappas: Vec<f64>,
    deltas: Vec<f64>,
    psi_weights: Vec<f64>,
    psi_sum: f64,
    d_constant: f64,
}

impl QuantileGrid {
    /// Build the grid for `K >= 1` levels `kappa_k = k / (K + 1)`.
    pub fn new(k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::Domain("quantile grid needs K >= 1".into()));
        }
        let kf = (k + 1) as f64;
        let mut kappas = Vec::with_capacity(k);
        let mut deltas = Vec::with_capacity(k);
        let mut psi_weights = Vec::with_capacity(k);
        let mut psi_sum = 0.0;
        for i in 1..=k {
            let kappa = i as f64 / kf;
            let delta = normal_quantile(kappa)?;
            let w = std_normal_pdf(delta);
            kappas.push(kappa);
            deltas.push(delta);
            psi_weights.push(w);
            psi_sum += w;
        }
        let mut num = 0.0;
        for &k1 in &kappas {
            for &k2 in &kappas {
                num += k1.min(k2) - k1 * k2;
            }
        }
        let d_constant = num / (psi_sum * psi_sum);
        Ok(Self {
            k,
            kappas,
            deltas,
            psi_weights,
            psi_sum,
            d_constant,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn psi_weights(&self) -> &[f64] {
        &self.psi_weights
    }

    pub fn psi_sum(&self) -> f64 {
        self.psi_sum
    }

    /// Variance of the kernel relative to the mean for Gaussian inputs.
    pub fn d_constant(&self) -> f64 {
        self.d_constant
    }
}

/// Median with the even-count midpoint convention.
pub fn coordinate_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len();
    if m % 2 == 1 {
        Ok(sorted[m / 2])
    } else {
        Ok(0.5 * (sorted[m / 2 - 1] + sorted[m / 2]))
    }
}

/// Mean after removing `floor(beta * m)` smallest and largest values.
pub fn trimmed_mean(values: &[f64], trim_fraction: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::Domain(format!(
            "trim fraction must lie in [0, 0.5), got {trim_fraction}"
        )));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = values.len();
    let cut = (trim_fraction * m as f64).floor() as usize;
    if 2 * cut >= m {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let kept = &sorted[cut..m - cut];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Variance-reduced median: the median corrected by the composite-quantile
/// indicator sum, scaled by the sampling standard deviation `per_value_sd`
/// of a single input value.
///
/// With `s = per_value_sd`, returns
/// `med - s * sum_k sum_j [I(Y_j <= med + s*delta_k) - kappa_k] / (m * psi_sum)`.
/// `s = 0` degenerates to the plain median. The indicator uses `<=` exactly,
/// so duplicated values sitting on a threshold count as inside.
pub fn vrmol_scalar(values: &[f64], per_value_sd: f64, grid: &QuantileGrid) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(per_value_sd >= 0.0) {
        return Err(Error::Domain(format!(
            "per-value standard deviation must be >= 0, got {per_value_sd}"
        )));
    }
    let med = coordinate_median(values)?;
    if per_value_sd == 0.0 {
        return Ok(med);
    }
    let m = values.len() as f64;
    let mut total = 0.0;
    for (&delta, &kappa) in grid.deltas().iter().zip(grid.kappas()) {
        let threshold = med + per_value_sd * delta;
        let count = values.iter().filter(|&&v| v <= threshold).count() as f64;
        total += count - m * kappa;
    }
    Ok(med - per_value_sd * total / (m * grid.psi_sum()))
}
