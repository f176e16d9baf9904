//! Monte-Carlo experiment driver: fresh data per replication, one scatter,
//! every requested method on the same reports, root-squared-error summaries.

use std::time::Instant;

use rayon::prelude::*;

use rose_core::baselines::{average_estimator, one_step_average, rose_med};
use rose_core::error::Result;
use rose_core::kernels::QuantileGrid;
use rose_core::models::{LossModel, ParamVector};
use rose_core::rose::{run_algorithm1, run_algorithm2};
use rose_core::seeding::{self, tags};
use rose_core::simnet::{broadcast_collect, scatter_data, Algorithm, Cluster, CommLedger, Request};

use crate::config::{ExperimentConfig, Method};
use crate::synth::{generate_synthetic, ramp_theta_star};

/// One summary row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub method: String,
    pub alpha: f64,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub replications: usize,
    pub mean_rse: f64,
    pub sd_rse: f64,
    pub failures: usize,
    pub runtime_ms: u64,
    pub seed: u64,
}

/// One row of the optional long-format output.
#[derive(Debug, Clone)]
pub struct RepRow {
    pub method: &'static str,
    pub replication: usize,
    pub rse: Option<f64>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    pub long: Vec<RepRow>,
}

fn rse(theta: &ParamVector, truth: &ParamVector) -> f64 {
    theta
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn run_method(method: Method, cluster: &Cluster, grid: &QuantileGrid) -> Result<ParamVector> {
    match method {
        Method::Average => {
            let mut ledger = CommLedger::new();
            let reports = broadcast_collect(cluster, &Request::Fit, Algorithm::One, &mut ledger)?;
            let thetas: Result<Vec<ParamVector>> = reports
                .iter()
                .map(|r| Ok(r.require_theta()?.clone()))
                .collect();
            average_estimator(&thetas?)
        }
        Method::OneStepAvg => one_step_average(cluster),
        Method::RoseMed => rose_med(cluster),
        Method::RoseK => Ok(run_algorithm1(cluster, grid)?.theta),
        Method::RoseRv => Ok(run_algorithm2(cluster, grid)?.theta),
    }
}

struct RepOutcome {
    replication: usize,
    // (rse on success, elapsed) per method in config order
    per_method: Vec<(Option<f64>, u64)>,
}

/// Run every replication and aggregate per method. Replications execute in
/// parallel; the aggregation consumes them in replication order, and every
/// random stream is derived from `(base_seed, replication)`, so the summary
/// statistics are independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let theta_star = ramp_theta_star(cfg.p)?;
    let grid = QuantileGrid::new(cfg.k)?;
    let model = LossModel::new(cfg.model, cfg.p);

    let outcomes: Vec<Result<RepOutcome>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seeding::mix_seed(cfg.base_seed, &[tags::REPLICATION, r as u64]);
            let dataset = generate_synthetic(cfg.model, cfg.m, cfg.n, &theta_star, rep_seed)?;
            let cluster = scatter_data(&dataset, model, &cfg.cluster_config(rep_seed))?;
            let mut per_method = Vec::with_capacity(cfg.methods.len());
            for &method in &cfg.methods {
                let start = Instant::now();
                let outcome = run_method(method, &cluster, &grid);
                let elapsed = start.elapsed().as_millis() as u64;
                per_method.push((outcome.ok().map(|t| rse(&t, &theta_star)), elapsed));
            }
            Ok(RepOutcome {
                replication: r,
                per_method,
            })
        })
        .collect();

    let mut ordered = Vec::with_capacity(cfg.replications);
    for outcome in outcomes {
        ordered.push(outcome?);
    }
    ordered.sort_by_key(|o| o.replication);

    let mut records = Vec::with_capacity(cfg.methods.len());
    let mut long = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let mut values = Vec::new();
        let mut failures = 0usize;
        let mut runtime_ms = 0u64;
        for outcome in &ordered {
            let (rse_value, elapsed) = outcome.per_method[mi];
            runtime_ms += elapsed;
            match rse_value {
                Some(v) => values.push(v),
                None => failures += 1,
            }
            long.push(RepRow {
                method: method.name(),
                replication: outcome.replication,
                rse: rse_value,
            });
        }
        let count = values.len();
        let mean = if count > 0 {
            values.iter().sum::<f64>() / count as f64
        } else {
            f64::NAN
        };
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        records.push(ResultRecord {
            method: method.name().to_string(),
            alpha: cfg.alpha,
            m: cfg.m,
            n: cfg.n,
            p: cfg.p,
            k: cfg.k,
            replications: cfg.replications,
            mean_rse: mean,
            sd_rse: sd,
            failures,
            runtime_ms,
            seed: cfg.base_seed,
        });
    }
    Ok(ExperimentOutput { records, long })
}
