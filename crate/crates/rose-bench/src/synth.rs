//! Synthetic regression designs for the benchmark grids.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use rose_core::error::{Error, Result};
use rose_core::models::{Dataset, ModelKind, ParamVector};
use rose_core::seeding::{self, tags};

/// The decreasing-ramp parameter `p^{-1/2} (1, (p-2)/(p-1), ..., 0)`.
pub fn ramp_theta_star(p: usize) -> Result<ParamVector> {
    if p < 2 {
        return Err(Error::Domain("parameter dimension must be >= 2".into()));
    }
    let scale = 1.0 / (p as f64).sqrt();
    let mut theta = Array1::<f64>::zeros(p);
    theta[0] = scale;
    for l in 1..p {
        theta[l] = scale * (p - 1 - l) as f64 / (p - 1) as f64;
    }
    Ok(theta)
}

/// Draw `m * n` rows in machine order. Covariates follow the AR(1)
/// recursion `X_l = 0.5 X_{l-1} + sqrt(0.75) Z_l`, whose stationary law is
/// the Gaussian with Toeplitz covariance `0.5^{|i-j|}`; responses come from
/// the requested generalized linear model at `theta_star`.
pub fn generate_synthetic(
    model: ModelKind,
    m: usize,
    n: usize,
    theta_star: &ParamVector,
    seed: u64,
) -> Result<Dataset> {
    let p = theta_star.len();
    if p < 2 {
        return Err(Error::Domain("parameter dimension must be >= 2".into()));
    }
    if model == ModelKind::Gaussian {
        return Err(Error::InvalidConfig(
            "synthetic generation supports the logistic and poisson models".into(),
        ));
    }
    let rows = m * n;
    let mut xs = Vec::with_capacity(rows * p);
    let mut ys = Vec::with_capacity(rows);
    let innovation = (1.0 - 0.25f64).sqrt();
    for machine in 1..=m {
        let mut rng = seeding::stream_rng(seed, &[tags::DATA, machine as u64]);
        for _ in 0..n {
            let mut z_lin = 0.0;
            let mut prev = 0.0;
            for l in 0..p {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let x = if l == 0 {
                    noise
                } else {
                    0.5 * prev + innovation * noise
                };
                prev = x;
                xs.push(x);
                z_lin += x * theta_star[l];
            }
            let y = match model {
                ModelKind::Logistic => {
                    let p0 = 1.0 / (1.0 + (-z_lin).exp());
                    f64::from(rng.random::<f64>() < p0)
                }
                ModelKind::Poisson => {
                    if z_lin > 700.0 {
                        return Err(Error::LinearPredictorOverflow(z_lin));
                    }
                    Poisson::new(z_lin.exp())
                        .map_err(|e| Error::Domain(format!("poisson rate: {e}")))?
                        .sample(&mut rng)
                }
                ModelKind::Gaussian => unreachable!(),
            };
            ys.push(y);
        }
    }
    Dataset::new(
        Array2::from_shape_vec((rows, p), xs)
            .map_err(|e| Error::Domain(e.to_string()))?,
        Array1::from(ys),
        Some(theta_star.clone()),
    )
}
