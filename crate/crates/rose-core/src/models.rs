//! Loss models: per-sample value, gradient and Hessian for the three GLM
//! losses, plus shard-level objective evaluation.
//!
//! Every loss here has the generalized-linear structure
//! `f(x, y, theta) = phi(z, y)` with `z = x'theta`, so the per-sample
//! gradient is `s(z, y) * x` and the Hessian is `w(z, y) * x x'` with
//! `w >= 0` (convexity).

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg;

/// Model coordinates `theta_1..theta_p`.
pub type ParamVector = Array1<f64>;

/// A full data matrix before scattering: one row per sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub covariates: Array2<f64>,
    pub responses: Array1<f64>,
    /// Generating parameter when known (synthetic data); drives error
    /// reporting and the response-regeneration attacks.
    pub truth: Option<ParamVector>,
}

impl Dataset {
    pub fn new(
        covariates: Array2<f64>,
        responses: Array1<f64>,
        truth: Option<ParamVector>,
    ) -> Result<Self> {
        if covariates.nrows() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: covariates.nrows(),
                got: responses.len(),
            });
        }
        Ok(Self {
            covariates,
            responses,
            truth,
        })
    }

    pub fn rows(&self) -> usize {
        self.responses.len()
    }

    pub fn dim(&self) -> usize {
        self.covariates.ncols()
    }

    /// Prepend a constant-1 column; a known generating parameter gains a
    /// leading zero so error reporting stays aligned.
    pub fn with_intercept(&self) -> Dataset {
        let (rows, p) = (self.rows(), self.dim());
        let mut covariates = Array2::<f64>::ones((rows, p + 1));
        covariates
            .slice_mut(ndarray::s![.., 1..])
            .assign(&self.covariates);
        let truth = self.truth.as_ref().map(|t| {
            let mut ext = Array1::<f64>::zeros(p + 1);
            ext.slice_mut(ndarray::s![1..]).assign(t);
            ext
        });
        Dataset {
            covariates,
            responses: self.responses.clone(),
            truth,
        }
    }
}

/// One machine's local sample block.
#[derive(Debug, Clone)]
pub struct DataShard {
    pub covariates: Array2<f64>,
    pub responses: Array1<f64>,
    /// 1-based machine id, unique within a cluster; machine 1 is the center.
    pub machine_id: usize,
}

impl DataShard {
    pub fn new(covariates: Array2<f64>, responses: Array1<f64>, machine_id: usize) -> Result<Self> {
        if covariates.nrows() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: covariates.nrows(),
                got: responses.len(),
            });
        }
        if responses.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            covariates,
            responses,
            machine_id,
        })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn dim(&self) -> usize {
        self.covariates.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Logistic,
    Poisson,
    Gaussian,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Poisson => "poisson",
            ModelKind::Gaussian => "gaussian",
        }
    }
}

/// A loss kind together with the model dimension `p`.
#[derive(Debug, Clone, Copy)]
pub struct LossModel {
    pub kind: ModelKind,
    pub dim: usize,
}

/// Per-sample evaluation: loss value, gradient and Hessian.
#[derive(Debug, Clone)]
pub struct SampleEval {
    pub loss: f64,
    pub gradient: Array1<f64>,
    pub hessian: Array2<f64>,
}

/// Linear predictor cap for the Poisson loss; exp saturates the double
/// range near 709.
const POISSON_OVERFLOW: f64 = 700.0;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LossModel {
    pub fn new(kind: ModelKind, dim: usize) -> Self {
        Self { kind, dim }
    }

    /// Scalar pieces `(loss, s, w)` of the loss at linear predictor `z`:
    /// gradient is `s * x`, Hessian is `w * x x'`.
    pub(crate) fn link_terms(&self, z: f64, y: f64) -> Result<(f64, f64, f64)> {
        match self.kind {
            ModelKind::Logistic => {
                // log(1 + exp(z)) - y z, in the overflow-safe form
                // max(z, 0) + log1p(exp(-|z|)) - y z
                let loss = z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
                let p0 = sigmoid(z);
                Ok((loss, p0 - y, p0 * (1.0 - p0)))
            }
            ModelKind::Poisson => {
                if z > POISSON_OVERFLOW {
                    return Err(Error::LinearPredictorOverflow(z));
                }
                let lambda = z.exp();
                Ok((lambda - y * z, lambda - y, lambda))
            }
            ModelKind::Gaussian => {
                let r = y - z;
                Ok((0.5 * r * r, -r, 1.0))
            }
        }
    }

    fn check_dim(&self, x: ArrayView1<'_, f64>, theta: &ParamVector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// Loss, gradient and Hessian of a single sample.
    pub fn eval_sample(
        &self,
        x: ArrayView1<'_, f64>,
        y: f64,
        theta: &ParamVector,
    ) -> Result<SampleEval> {
        self.check_dim(x, theta)?;
        if self.kind == ModelKind::Logistic && y != 0.0 && y != 1.0 {
            return Err(Error::NonBinaryResponse { row: 0, value: y });
        }
        let z = x.dot(theta);
        let (loss, s, w) = self.link_terms(z, y)?;
        let p = self.dim;
        let gradient = x.map(|&v| s * v);
        let mut hessian = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            for j in i..p {
                let v = w * x[i] * x[j];
                hessian[(i, j)] = v;
                hessian[(j, i)] = v;
            }
        }
        Ok(SampleEval {
            loss,
            gradient,
            hessian,
        })
    }
}

/// Negative Bernoulli log-likelihood with logit link.
pub fn logistic_eval(x: ArrayView1<'_, f64>, y: f64, theta: &ParamVector) -> Result<SampleEval> {
    LossModel::new(ModelKind::Logistic, x.len()).eval_sample(x, y, theta)
}

/// Negative Poisson log-likelihood with log link (constant term dropped).
pub fn poisson_eval(x: ArrayView1<'_, f64>, y: f64, theta: &ParamVector) -> Result<SampleEval> {
    LossModel::new(ModelKind::Poisson, x.len()).eval_sample(x, y, theta)
}

/// Squared-error loss; the closed-form test model.
pub fn gaussian_eval(x: ArrayView1<'_, f64>, y: f64, theta: &ParamVector) -> Result<SampleEval> {
    LossModel::new(ModelKind::Gaussian, x.len()).eval_sample(x, y, theta)
}

/// Shard objective `F_j`: sample averages of loss, gradient and Hessian,
/// summed in index order so replays are bit-identical. The returned Hessian
/// is exactly symmetric.
pub fn shard_objective(
    shard: &DataShard,
    model: &LossModel,
    theta: &ParamVector,
) -> Result<(f64, Array1<f64>, Array2<f64>)> {
    let n = shard.n();
    let p = model.dim;
    if shard.dim() != p || theta.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: if shard.dim() != p {
                shard.dim()
            } else {
                theta.len()
            },
        });
    }
    let mut loss = 0.0;
    let mut grad = Array1::<f64>::zeros(p);
    let mut hess = Array2::<f64>::zeros((p, p));
    for i in 0..n {
        let x = shard.covariates.row(i);
        let y = shard.responses[i];
        if model.kind == ModelKind::Logistic && y != 0.0 && y != 1.0 {
            return Err(Error::NonBinaryResponse { row: i, value: y });
        }
        let z = x.dot(theta);
        let (l, s, w) = model.link_terms(z, y)?;
        loss += l;
        for a in 0..p {
            grad[a] += s * x[a];
        }
        for a in 0..p {
            let wxa = w * x[a];
            for b in a..p {
                hess[(a, b)] += wxa * x[b];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    grad.mapv_inplace(|v| v * inv_n);
    for a in 0..p {
        for b in a..p {
            let v = hess[(a, b)] * inv_n;
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    debug_assert!({
        let mut h = hess.clone();
        linalg::symmetrize(&mut h);
        h == hess
    });
    Ok((loss, grad, hess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logistic_symmetric_point() {
        let x = arr1(&[1.0, 0.0]);
        let theta = arr1(&[0.0, 0.0]);
        let e = logistic_eval(x.view(), 1.0, &theta).unwrap();
        assert!((e.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((e.gradient[0] + 0.5).abs() < 1e-15);
        assert_eq!(e.gradient[1], 0.0);
        assert!((e.hessian[(0, 0)] - 0.25).abs() < 1e-15);
        assert_eq!(e.hessian[(0, 1)], 0.0);
        assert_eq!(e.hessian[(1, 1)], 0.0);
    }

    #[test]
    fn logistic_hand_evaluation() {
        let x = arr1(&[1.0]);
        let theta = arr1(&[3.0f64.ln()]);
        let e = logistic_eval(x.view(), 0.0, &theta).unwrap();
        assert!((e.loss - 4.0f64.ln()).abs() < 1e-14);
        assert!((e.gradient[0] - 0.75).abs() < 1e-14);
        assert!((e.hessian[(0, 0)] - 0.1875).abs() < 1e-14);
    }

    #[test]
    fn logistic_saturates_without_overflow() {
        let x = arr1(&[1.0]);
        let theta = arr1(&[1000.0]);
        let e = logistic_eval(x.view(), 1.0, &theta).unwrap();
        assert!(e.loss.is_finite());
        assert!(e.gradient[0].abs() < 1e-12);
        assert!(e.hessian[(0, 0)].abs() < 1e-12);
        // the mirrored tail
        let e = logistic_eval(x.view(), 0.0, &arr1(&[-1000.0])).unwrap();
        assert!(e.loss.is_finite() && e.gradient[0].abs() < 1e-12);
    }

    #[test]
    fn logistic_rejects_non_binary_response() {
        let x = arr1(&[1.0]);
        let theta = arr1(&[0.0]);
        assert!(matches!(
            logistic_eval(x.view(), 2.0, &theta),
            Err(Error::NonBinaryResponse { .. })
        ));
    }

    #[test]
    fn poisson_at_theta_zero() {
        let theta = arr1(&[0.0, 0.0]);
        let x = arr1(&[0.7, -0.2]);
        for y in [0.0, 1.0, 4.0] {
            let e = poisson_eval(x.view(), y, &theta).unwrap();
            for j in 0..2 {
                assert!((e.gradient[j] - (1.0 - y) * x[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn poisson_stationary_at_lambda_equals_y() {
        let x = arr1(&[1.0]);
        let theta = arr1(&[2.0f64.ln()]);
        let e = poisson_eval(x.view(), 2.0, &theta).unwrap();
        assert!((e.loss - (2.0 - 2.0 * 2.0f64.ln())).abs() < 1e-14);
        assert!(e.gradient[0].abs() < 1e-14);
        assert!((e.hessian[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn poisson_hand_evaluation() {
        let x = arr1(&[2.0]);
        let theta = arr1(&[0.0]);
        let e = poisson_eval(x.view(), 0.0, &theta).unwrap();
        assert!((e.loss - 1.0).abs() < 1e-15);
        assert!((e.gradient[0] - 2.0).abs() < 1e-15);
        assert!((e.hessian[(0, 0)] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_overflow_guard() {
        let x = arr1(&[1.0]);
        let theta = arr1(&[701.0]);
        assert!(matches!(
            poisson_eval(x.view(), 1.0, &theta),
            Err(Error::LinearPredictorOverflow(_))
        ));
    }

    #[test]
    fn gaussian_examples() {
        let x = arr1(&[1.0]);
        let theta = arr1(&[1.0]);
        // zero residual
        let e = gaussian_eval(x.view(), 1.0, &theta).unwrap();
        assert_eq!(e.loss, 0.0);
        assert_eq!(e.gradient[0], 0.0);
        // hand evaluation
        let e = gaussian_eval(x.view(), 3.0, &theta).unwrap();
        assert!((e.loss - 2.0).abs() < 1e-15);
        assert!((e.gradient[0] + 2.0).abs() < 1e-15);
        assert!((e.hessian[(0, 0)] - 1.0).abs() < 1e-15);
        // null covariate
        let z = arr1(&[0.0, 0.0]);
        let e = gaussian_eval(z.view(), 3.0, &arr1(&[1.0, 1.0])).unwrap();
        assert!(e.gradient.iter().all(|&g| g == 0.0));
        assert!(e.hessian.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let x = arr1(&[1.0, 2.0]);
        let theta = arr1(&[1.0]);
        assert!(matches!(
            gaussian_eval(x.view(), 0.0, &theta),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn random_case(rng: &mut ChaCha8Rng, kind: ModelKind, p: usize) -> (Array1<f64>, f64, ParamVector) {
        let x: Array1<f64> = Array1::from((0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>());
        let theta: Array1<f64> =
            Array1::from((0..p).map(|_| rng.random::<f64>() * 1.2 - 0.6).collect::<Vec<_>>());
        let y = match kind {
            ModelKind::Logistic => {
                if rng.random::<f64>() < 0.5 {
                    0.0
                } else {
                    1.0
                }
            }
            ModelKind::Poisson => rng.random_range(0..7) as f64,
            ModelKind::Gaussian => rng.random::<f64>() * 4.0 - 2.0,
        };
        (x, y, theta)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [ModelKind::Logistic, ModelKind::Poisson, ModelKind::Gaussian] {
            let model = LossModel::new(kind, 4);
            for _ in 0..50 {
                let (x, y, theta) = random_case(&mut rng, kind, 4);
                let e = model.eval_sample(x.view(), y, &theta).unwrap();
                for l in 0..4 {
                    let h = 1e-6 * theta[l].abs().max(1.0);
                    let mut up = theta.clone();
                    up[l] += h;
                    let mut dn = theta.clone();
                    dn[l] -= h;
                    let fu = model.eval_sample(x.view(), y, &up).unwrap().loss;
                    let fd = model.eval_sample(x.view(), y, &dn).unwrap().loss;
                    let fd_grad = (fu - fd) / (2.0 * h);
                    let scale = e.gradient[l].abs().max(1.0);
                    assert!(
                        (fd_grad - e.gradient[l]).abs() / scale <= 1e-5,
                        "{kind:?} grad[{l}]: fd {fd_grad} vs {}",
                        e.gradient[l]
                    );
                }
            }
        }
    }

    #[test]
    fn hessians_match_finite_differences_of_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [ModelKind::Logistic, ModelKind::Poisson, ModelKind::Gaussian] {
            let model = LossModel::new(kind, 3);
            for _ in 0..30 {
                let (x, y, theta) = random_case(&mut rng, kind, 3);
                let e = model.eval_sample(x.view(), y, &theta).unwrap();
                for l in 0..3 {
                    let h = 1e-6 * theta[l].abs().max(1.0);
                    let mut up = theta.clone();
                    up[l] += h;
                    let mut dn = theta.clone();
                    dn[l] -= h;
                    let gu = model.eval_sample(x.view(), y, &up).unwrap().gradient;
                    let gd = model.eval_sample(x.view(), y, &dn).unwrap().gradient;
                    for c in 0..3 {
                        let fd = (gu[c] - gd[c]) / (2.0 * h);
                        let scale = e.hessian[(c, l)].abs().max(1.0);
                        assert!(
                            (fd - e.hessian[(c, l)]).abs() / scale <= 1e-4,
                            "{kind:?} hess[{c},{l}]"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn per_sample_hessians_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [ModelKind::Logistic, ModelKind::Poisson, ModelKind::Gaussian] {
            let model = LossModel::new(kind, 5);
            let (x, y, theta) = random_case(&mut rng, kind, 5);
            let e = model.eval_sample(x.view(), y, &theta).unwrap();
            for _ in 0..100 {
                let v: Array1<f64> =
                    Array1::from((0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>());
                let q = v.dot(&e.hessian.dot(&v));
                assert!(q >= -1e-12, "{kind:?}: v'Hv = {q}");
            }
        }
    }

    #[test]
    fn shard_objective_single_sample_equals_eval() {
        let model = LossModel::new(ModelKind::Logistic, 2);
        let shard = DataShard::new(arr2(&[[0.3, -0.8]]), arr1(&[1.0]), 1).unwrap();
        let theta = arr1(&[0.4, 0.2]);
        let (f, g, h) = shard_objective(&shard, &model, &theta).unwrap();
        let e = model
            .eval_sample(shard.covariates.row(0), 1.0, &theta)
            .unwrap();
        assert!((f - e.loss).abs() < 1e-15);
        assert!((g[0] - e.gradient[0]).abs() < 1e-15);
        assert!((h[(0, 1)] - e.hessian[(0, 1)]).abs() < 1e-15);
    }

    #[test]
    fn shard_objective_duplicate_invariance() {
        let model = LossModel::new(ModelKind::Poisson, 2);
        let x = arr2(&[[0.3, -0.8], [1.0, 0.1], [-0.4, 0.6]]);
        let y = arr1(&[1.0, 3.0, 0.0]);
        let shard = DataShard::new(x.clone(), y.clone(), 1).unwrap();
        let mut x2 = x.clone().into_raw_vec_and_offset().0;
        x2.extend_from_slice(x.clone().into_raw_vec_and_offset().0.as_slice());
        let doubled = DataShard::new(
            Array2::from_shape_vec((6, 2), x2).unwrap(),
            arr1(&[1.0, 3.0, 0.0, 1.0, 3.0, 0.0]),
            1,
        )
        .unwrap();
        let theta = arr1(&[0.2, -0.1]);
        let (f1, g1, h1) = shard_objective(&shard, &model, &theta).unwrap();
        let (f2, g2, h2) = shard_objective(&doubled, &model, &theta).unwrap();
        assert!((f1 - f2).abs() < 1e-14);
        for j in 0..2 {
            assert!((g1[j] - g2[j]).abs() < 1e-14);
            for i in 0..2 {
                assert!((h1[(i, j)] - h2[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shard_objective_gaussian_matches_normal_equations() {
        // 3 samples, direct average oracle
        let x = arr2(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]);
        let y = arr1(&[0.5, 1.0, 2.5]);
        let shard = DataShard::new(x.clone(), y.clone(), 1).unwrap();
        let model = LossModel::new(ModelKind::Gaussian, 2);
        let theta = arr1(&[0.1, 0.7]);
        let (f, g, h) = shard_objective(&shard, &model, &theta).unwrap();
        let mut f_want = 0.0;
        let mut g_want = arr1(&[0.0, 0.0]);
        let mut h_want = arr2(&[[0.0, 0.0], [0.0, 0.0]]);
        for i in 0..3 {
            let r = y[i] - x.row(i).dot(&theta);
            f_want += 0.5 * r * r / 3.0;
            for a in 0..2 {
                g_want[a] += -r * x[(i, a)] / 3.0;
                for b in 0..2 {
                    h_want[(a, b)] += x[(i, a)] * x[(i, b)] / 3.0;
                }
            }
        }
        assert!((f - f_want).abs() < 1e-14);
        for a in 0..2 {
            assert!((g[a] - g_want[a]).abs() < 1e-14);
            for b in 0..2 {
                assert!((h[(a, b)] - h_want[(a, b)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn intercept_flag_prepends_a_constant_column() {
        let data = Dataset::new(
            arr2(&[[0.5, 2.0], [1.5, -1.0]]),
            arr1(&[1.0, 0.0]),
            Some(arr1(&[0.3, -0.2])),
        )
        .unwrap();
        let aug = data.with_intercept();
        assert_eq!(aug.dim(), 3);
        assert_eq!(aug.covariates.column(0).to_vec(), vec![1.0, 1.0]);
        assert_eq!(aug.covariates[(1, 1)], 1.5);
        assert_eq!(aug.truth.unwrap().to_vec(), vec![0.0, 0.3, -0.2]);
    }

    #[test]
    fn shard_objective_permutation_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let p = 3;
        let model = LossModel::new(ModelKind::Logistic, p);
        let xs: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 })
            .collect();
        let shard = DataShard::new(
            Array2::from_shape_vec((n, p), xs.clone()).unwrap(),
            Array1::from(ys.clone()),
            1,
        )
        .unwrap();
        // reversed sample order
        let mut xs_rev = Vec::with_capacity(n * p);
        for i in (0..n).rev() {
            xs_rev.extend_from_slice(&xs[i * p..(i + 1) * p]);
        }
        let ys_rev: Vec<f64> = ys.iter().rev().copied().collect();
        let rev = DataShard::new(
            Array2::from_shape_vec((n, p), xs_rev).unwrap(),
            Array1::from(ys_rev),
            1,
        )
        .unwrap();
        let theta = arr1(&[0.3, -0.2, 0.5]);
        let (f1, g1, h1) = shard_objective(&shard, &model, &theta).unwrap();
        let (f2, g2, h2) = shard_objective(&rev, &model, &theta).unwrap();
        assert!((f1 - f2).abs() < 1e-12);
        for a in 0..p {
            assert!((g1[a] - g2[a]).abs() < 1e-12);
            for b in 0..p {
                assert!((h1[(a, b)] - h2[(a, b)]).abs() < 1e-12);
            }
        }
    }
}
