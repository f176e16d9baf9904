//! Deterministic selection of Byzantine machines and the attack models,
//! applied either to transmitted statistics or to raw local data.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::models::{DataShard, LossModel, ModelKind, ParamVector};
use crate::report::LocalReport;
use crate::seeding::{self, tags};

/// Arbitrary-noise corruption is clamped to keep reports finite.
const NOISE_CLAMP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackKind {
    /// No corruption anywhere.
    None,
    /// Multiply every transmitted statistic by `factor`, in both rounds.
    ScaleStatistic { factor: f64 },
    /// Replace every transmitted statistic with seeded heavy-tailed noise.
    Arbitrary,
    /// Binary responses recorded as `1 - y` before local fitting.
    LabelFlip,
    /// Covariates received `factor` times larger than the correct values.
    CovariateScale { factor: f64 },
    /// Responses regenerated from the rate with the negated linear predictor.
    PoissonNegate,
}

impl AttackKind {
    /// Data attacks corrupt shards at scatter time; statistic attacks corrupt
    /// reports at transmission time.
    pub fn is_data_attack(self) -> bool {
        matches!(
            self,
            AttackKind::LabelFlip | AttackKind::CovariateScale { .. } | AttackKind::PoissonNegate
        )
    }

    pub fn is_statistic_attack(self) -> bool {
        matches!(self, AttackKind::ScaleStatistic { .. } | AttackKind::Arbitrary)
    }
}

/// Which machines misbehave and how.
#[derive(Debug, Clone, Copy)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Byzantine fraction; the harness corrupts exactly `floor(alpha * m)`
    /// machines.
    pub alpha: f64,
    /// When set, the central machine is itself corrupted and the remaining
    /// Byzantine ids are drawn from the node machines.
    pub center_may_be_byzantine: bool,
}

impl AttackSpec {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            alpha: 0.0,
            center_may_be_byzantine: false,
        }
    }

    pub fn new(kind: AttackKind, alpha: f64) -> Self {
        Self {
            kind,
            alpha,
            center_may_be_byzantine: false,
        }
    }

    pub fn with_byzantine_center(mut self) -> Self {
        self.center_may_be_byzantine = true;
        self
    }

    /// Check the fraction and factor bounds.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "byzantine fraction must lie in [0, 0.5), got {}",
                self.alpha
            )));
        }
        match self.kind {
            AttackKind::ScaleStatistic { factor } | AttackKind::CovariateScale { factor } => {
                if factor == 0.0 || !factor.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "attack factor must be finite and nonzero, got {factor}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Choose exactly `floor(alpha * m)` Byzantine machine ids, deterministically
/// in `seed`. Ids are drawn without replacement from the node machines
/// `{2..m}`; when the center may be Byzantine, machine 1 is corrupted first
/// and the remainder drawn from the nodes.
pub fn build_byzantine_set(m: usize, spec: &AttackSpec, seed: u64) -> Result<BTreeSet<usize>> {
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    spec.validate()?;
    let count = (spec.alpha * m as f64).floor() as usize;
    if 2 * count >= m && count > 0 {
        return Err(Error::InvalidConfig(format!(
            "{count} byzantine machines out of {m} reaches half the cluster"
        )));
    }
    let mut set = BTreeSet::new();
    if count == 0 {
        return Ok(set);
    }
    let mut remaining = count;
    if spec.center_may_be_byzantine {
        set.insert(1);
        remaining -= 1;
    }
    let mut pool: Vec<usize> = (2..=m).collect();
    let mut rng = seeding::stream_rng(seed, &[tags::BYZANTINE_SET, m as u64]);
    for slot in 0..remaining {
        let pick = rng.random_range(slot..pool.len());
        pool.swap(slot, pick);
        set.insert(pool[slot]);
    }
    Ok(set)
}

fn corrupt_vec(v: &mut Array1<f64>, kind: AttackKind, rng: &mut ChaCha8Rng) {
    match kind {
        AttackKind::ScaleStatistic { factor } => v.mapv_inplace(|x| factor * x),
        AttackKind::Arbitrary => v.mapv_inplace(|_| heavy_tailed(rng)),
        _ => {}
    }
}

fn corrupt_mat(m: &mut Array2<f64>, kind: AttackKind, rng: &mut ChaCha8Rng) {
    match kind {
        AttackKind::ScaleStatistic { factor } => m.mapv_inplace(|x| factor * x),
        AttackKind::Arbitrary => m.mapv_inplace(|_| heavy_tailed(rng)),
        _ => {}
    }
}

/// Cauchy-like draw: ratio of a normal to a uniform, clamped to stay finite.
fn heavy_tailed(rng: &mut ChaCha8Rng) -> f64 {
    let num: f64 = rng.random::<f64>() * 2.0 - 1.0;
    let den: f64 = rng.random::<f64>() - 0.5;
    (10.0 * num / den).clamp(-NOISE_CLAMP, NOISE_CLAMP)
}

/// Corrupt every transmitted field of a Byzantine machine's report.
/// The returned report always carries the corrupted flag; replaying the same
/// stream reproduces the same corruption.
pub fn attack_statistics(
    report: &LocalReport,
    spec: &AttackSpec,
    rng: &mut ChaCha8Rng,
) -> LocalReport {
    let mut out = report.clone();
    out.corrupted = true;
    if !spec.kind.is_statistic_attack() {
        return out;
    }
    if let Some(v) = out.theta_hat.as_mut() {
        corrupt_vec(v, spec.kind, rng);
    }
    if let Some(v) = out.sigma_diag.as_mut() {
        corrupt_vec(v, spec.kind, rng);
    }
    if let Some(v) = out.gradient.as_mut() {
        corrupt_vec(v, spec.kind, rng);
    }
    if let Some(m) = out.hessian.as_mut() {
        corrupt_mat(m, spec.kind, rng);
    }
    if let Some(v) = out.grad_vars.as_mut() {
        corrupt_vec(v, spec.kind, rng);
    }
    if let Some(m) = out.hess_vars.as_mut() {
        corrupt_mat(m, spec.kind, rng);
    }
    out
}

/// Corrupt a Byzantine machine's raw data before local fitting. The original
/// shard is untouched.
pub fn attack_data(
    shard: &DataShard,
    model: &LossModel,
    truth: Option<&ParamVector>,
    spec: &AttackSpec,
    rng: &mut ChaCha8Rng,
) -> Result<DataShard> {
    if !spec.kind.is_data_attack() {
        return Err(Error::InvalidConfig(format!(
            "{:?} is not a data attack",
            spec.kind
        )));
    }
    let mut out = shard.clone();
    match spec.kind {
        AttackKind::LabelFlip => {
            for (row, y) in out.responses.iter_mut().enumerate() {
                if *y != 0.0 && *y != 1.0 {
                    return Err(Error::NonBinaryResponse { row, value: *y });
                }
                *y = 1.0 - *y;
            }
        }
        AttackKind::CovariateScale { factor } => {
            out.covariates.mapv_inplace(|x| factor * x);
        }
        AttackKind::PoissonNegate => {
            let theta = truth.ok_or_else(|| {
                Error::InvalidConfig(
                    "response-regeneration attack needs the generating parameter".into(),
                )
            })?;
            if model.kind != ModelKind::Poisson {
                return Err(Error::InvalidConfig(
                    "response-regeneration attack applies to the poisson model".into(),
                ));
            }
            for i in 0..out.n() {
                let z = -out.covariates.row(i).dot(theta);
                if z > 700.0 {
                    return Err(Error::LinearPredictorOverflow(z));
                }
                let lambda = z.exp();
                let draw = Poisson::new(lambda)
                    .map_err(|e| Error::Domain(format!("poisson rate {lambda}: {e}")))?
                    .sample(rng);
                out.responses[i] = draw;
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}
