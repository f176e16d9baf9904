//! Simulated machine cluster: data scattering, the two-round
//! broadcast/collect message flow, and exact communication accounting.
//!
//! Workers run in parallel and share nothing; reports are committed in
//! machine-id order before aggregation, so results are independent of
//! scheduling. The center owns the ledger and all aggregation.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;

use crate::byzantine::{attack_data, attack_statistics, build_byzantine_set, AttackSpec};
use crate::error::{Error, Result};
use crate::models::{DataShard, Dataset, LossModel, ParamVector};
use crate::report::LocalReport;
use crate::seeding::{self, tags};
use crate::solver::{fit_local, gradient_entry_variances, hessian_entry_variances, LocalFit};
use crate::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};

/// How a transmitted p x p matrix is counted on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianWire {
    /// Full matrix, `p^2` scalars.
    Full,
    /// Upper triangle only, `p (p + 1) / 2` scalars.
    Triangular,
}

impl HessianWire {
    pub fn scalars(self, p: usize) -> u64 {
        match self {
            HessianWire::Full => (p * p) as u64,
            HessianWire::Triangular => (p * (p + 1) / 2) as u64,
        }
    }
}

/// Cluster layout, seed and attack configuration.
#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub attack: AttackSpec,
    pub hessian_wire: HessianWire,
    /// When false the central machine holds no usable data; protocols that
    /// need it synthesize its reports from a seeded stream.
    pub center_has_data: bool,
}

impl ClusterConfig {
    pub fn new(m: usize, n: usize, seed: u64, attack: AttackSpec) -> Self {
        Self {
            m,
            n,
            seed,
            attack,
            hessian_wire: HessianWire::Full,
            center_has_data: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return Err(Error::InvalidConfig(format!(
                "cluster needs at least 3 machines, got {}",
                self.m
            )));
        }
        if self.n < 1 {
            return Err(Error::InvalidConfig("per-machine sample size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    NodeToCenter,
    CenterToNode,
}

/// One transmission event.
#[derive(Debug, Clone, Copy)]
pub struct CommRecord {
    pub round: usize,
    pub direction: Direction,
    pub machine_id: usize,
    pub scalars: u64,
}

/// Append-only record of every scalar that crossed the wire.
#[derive(Debug, Clone, Default)]
pub struct CommLedger {
    records: Vec<CommRecord>,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn credit(&mut self, round: usize, direction: Direction, machine_id: usize, scalars: u64) {
        self.records.push(CommRecord {
            round,
            direction,
            machine_id,
            scalars,
        });
    }

    pub fn records(&self) -> &[CommRecord] {
        &self.records
    }

    pub fn totals(&self) -> (u64, u64) {
        let mut node_to_center = 0;
        let mut center_to_node = 0;
        for r in &self.records {
            match r.direction {
                Direction::NodeToCenter => node_to_center += r.scalars,
                Direction::CenterToNode => center_to_node += r.scalars,
            }
        }
        (node_to_center, center_to_node)
    }
}

/// Sums of transmitted scalars by direction: `(node_to_center, center_to_node)`.
pub fn ledger_totals(ledger: &CommLedger) -> (u64, u64) {
    ledger.totals()
}

/// What the center asks the machines for.
#[derive(Debug, Clone)]
pub enum Request {
    /// Round 1: fit the local objective and report the estimate.
    Fit,
    /// Round 2: evaluate gradient and Hessian at the broadcast point.
    DerivativesAt(ParamVector),
}

/// Wire mode: which protocol's report layout (and scalar counts) to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Honest center: estimates only, scales computed from the central shard.
    One,
    /// Byzantine-tolerant center: machines additionally transmit variance
    /// estimators so every scale becomes a median over machines.
    Two,
}

impl Algorithm {
    pub fn index(self) -> u8 {
        match self {
            Algorithm::One => 1,
            Algorithm::Two => 2,
        }
    }
}

/// The simulated cluster: immutable shards, ground-truth Byzantine set and
/// a lazily computed cache of local fits (deterministic, so shared by every
/// protocol run over this cluster).
pub struct Cluster {
    shards: Vec<DataShard>,
    model: LossModel,
    truth: Option<ParamVector>,
    config: ClusterConfig,
    byzantine: BTreeSet<usize>,
    fits: OnceLock<Vec<Result<LocalFit>>>,
}

impl Cluster {
    pub fn model(&self) -> &LossModel {
        &self.model
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn machines(&self) -> usize {
        self.config.m
    }

    pub fn local_n(&self) -> usize {
        self.config.n
    }

    pub fn truth(&self) -> Option<&ParamVector> {
        self.truth.as_ref()
    }

    pub fn byzantine_ids(&self) -> &BTreeSet<usize> {
        &self.byzantine
    }

    pub fn shard(&self, machine_id: usize) -> &DataShard {
        &self.shards[machine_id - 1]
    }

    /// The central machine's shard, used by the honest-center protocol for
    /// its variance scales.
    pub fn center_shard(&self) -> Result<&DataShard> {
        if !self.config.center_has_data {
            return Err(Error::InvalidConfig(
                "central machine has no data in this configuration".into(),
            ));
        }
        Ok(self.shard(1))
    }

    fn local_fits(&self) -> &[Result<LocalFit>] {
        self.fits.get_or_init(|| {
            self.shards
                .par_iter()
                .map(|shard| {
                    let p = self.model.dim;
                    fit_local(
                        shard,
                        &self.model,
                        &Array1::zeros(p),
                        DEFAULT_TOL,
                        DEFAULT_MAX_ITER,
                    )
                    .map_err(|e| e.at_machine(shard.machine_id))
                })
                .collect()
        })
    }
}

/// Split a dataset into `m` contiguous shards of `n` rows in machine order,
/// applying data attacks to the Byzantine shards.
pub fn scatter_data(dataset: &Dataset, model: LossModel, config: &ClusterConfig) -> Result<Cluster> {
    config.validate()?;
    let (m, n) = (config.m, config.n);
    if dataset.rows() != m * n {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            got: dataset.rows(),
        });
    }
    if dataset.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: dataset.dim(),
        });
    }
    let byzantine = build_byzantine_set(m, &config.attack, config.seed)?;
    let mut shards = Vec::with_capacity(m);
    for j in 0..m {
        let rows = j * n..(j + 1) * n;
        let covariates: Array2<f64> = dataset
            .covariates
            .slice(ndarray::s![rows.clone(), ..])
            .to_owned();
        let responses: Array1<f64> = dataset.responses.slice(ndarray::s![rows]).to_owned();
        let machine_id = j + 1;
        let mut shard = DataShard::new(covariates, responses, machine_id)?;
        if byzantine.contains(&machine_id) && config.attack.kind.is_data_attack() {
            let mut rng = seeding::stream_rng(config.seed, &[tags::DATA_ATTACK, machine_id as u64]);
            shard = attack_data(
                &shard,
                &model,
                dataset.truth.as_ref(),
                &config.attack,
                &mut rng,
            )
            .map_err(|e| e.at_machine(machine_id))?;
        }
        shards.push(shard);
    }
    Ok(Cluster {
        shards,
        model,
        truth: dataset.truth.clone(),
        config: config.clone(),
        byzantine,
        fits: OnceLock::new(),
    })
}

fn synthesize_report(
    machine_id: usize,
    request: &Request,
    alg: Algorithm,
    p: usize,
    seed: u64,
    round: usize,
) -> LocalReport {
    let mut rng = seeding::stream_rng(seed, &[tags::SYNTH_REPORT, round as u64, machine_id as u64]);
    let mut draw_vec = |len: usize| -> Array1<f64> {
        Array1::from((0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>())
    };
    let mut report = LocalReport::empty(machine_id);
    report.corrupted = true;
    match request {
        Request::Fit => {
            report.theta_hat = Some(draw_vec(p));
            if alg == Algorithm::Two {
                report.sigma_diag = Some(draw_vec(p).mapv(f64::abs));
            }
        }
        Request::DerivativesAt(_) => {
            report.gradient = Some(draw_vec(p));
            let h = draw_vec(p * p);
            report.hessian = Some(Array2::from_shape_vec((p, p), h.to_vec()).unwrap());
            if alg == Algorithm::Two {
                report.grad_vars = Some(draw_vec(p).mapv(f64::abs));
                let hv = draw_vec(p * p).mapv(f64::abs);
                report.hess_vars = Some(Array2::from_shape_vec((p, p), hv.to_vec()).unwrap());
            }
        }
    }
    report
}

fn round_of(request: &Request) -> usize {
    match request {
        Request::Fit => 1,
        Request::DerivativesAt(_) => 2,
    }
}

/// Ask every machine for its round payload and collect the reports in
/// machine-id order; statistic attacks are applied to Byzantine reports and
/// the ledger is credited with the exact scalar counts.
pub fn broadcast_collect(
    cluster: &Cluster,
    request: &Request,
    alg: Algorithm,
    ledger: &mut CommLedger,
) -> Result<Vec<LocalReport>> {
    let p = cluster.model.dim;
    let seed = cluster.config.seed;
    let round = round_of(request);
    let spec = cluster.config.attack;

    // Local fits are computed lazily once per cluster and shared.
    if matches!(request, Request::Fit) {
        let _ = cluster.local_fits();
    }

    let outcomes: Vec<Result<LocalReport>> = cluster
        .shards
        .par_iter()
        .map(|shard| {
            let id = shard.machine_id;
            if id == 1 && !cluster.config.center_has_data {
                return Ok(synthesize_report(id, request, alg, p, seed, round));
            }
            let mut report = LocalReport::empty(id);
            match request {
                Request::Fit => {
                    let fit = cluster.local_fits()[id - 1].clone()?;
                    report.theta_hat = Some(fit.theta_hat.clone());
                    if alg == Algorithm::Two {
                        report.sigma_diag = Some(fit.sigma_diag.clone());
                    }
                }
                Request::DerivativesAt(theta) => {
                    let (_, g, h) =
                        crate::models::shard_objective(shard, &cluster.model, theta)
                            .map_err(|e| e.at_machine(id))?;
                    report.gradient = Some(g);
                    report.hessian = Some(h);
                    if alg == Algorithm::Two {
                        report.grad_vars = Some(
                            gradient_entry_variances(shard, &cluster.model, theta)
                                .map_err(|e| e.at_machine(id))?,
                        );
                        report.hess_vars = Some(
                            hessian_entry_variances(shard, &cluster.model, theta)
                                .map_err(|e| e.at_machine(id))?,
                        );
                    }
                }
            }
            if cluster.byzantine.contains(&id) {
                let mut rng = seeding::stream_rng(
                    seed,
                    &[tags::STATISTIC_ATTACK, round as u64, id as u64],
                );
                report = attack_statistics(&report, &spec, &mut rng);
            }
            Ok(report)
        })
        .collect();

    let mut reports = Vec::with_capacity(cluster.config.m);
    for outcome in outcomes {
        reports.push(outcome?);
    }
    let wire = cluster.config.hessian_wire;
    for report in &reports {
        ledger.credit(
            round,
            Direction::NodeToCenter,
            report.machine_id,
            report.scalar_count(wire.scalars(p)),
        );
    }
    Ok(reports)
}

/// Credit the ledger for a center-to-node broadcast of a `p`-vector.
pub fn credit_broadcast(ledger: &mut CommLedger, m: usize, p: usize, round: usize) {
    for machine_id in 1..=m {
        ledger.credit(round, Direction::CenterToNode, machine_id, p as u64);
    }
}
