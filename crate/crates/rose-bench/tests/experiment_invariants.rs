//! Statistical invariants of the benchmark pipeline: attack-response
//! patterns, error shrinkage in the local sample size, method ordering,
//! and full-pipeline determinism.

use rose_bench::config::{ExperimentConfig, Method};
use rose_bench::emit::emit_results;
use rose_bench::experiment::{run_experiment, ExperimentOutput};
use rose_core::byzantine::AttackKind;
use rose_core::models::ModelKind;
use rose_core::seeding::stream_rng;

use rand::Rng;

fn per_rep(output: &ExperimentOutput, method: &str) -> Vec<f64> {
    output
        .long
        .iter()
        .filter(|row| row.method == method)
        .map(|row| row.rse.expect("no failures expected"))
        .collect()
}

/// Lower end of the two-sided 95% bootstrap interval for the mean.
fn bootstrap_lower(diffs: &[f64], seed: u64) -> f64 {
    let mut rng = stream_rng(seed, &[diffs.len() as u64]);
    let n = diffs.len();
    let mut means: Vec<f64> = (0..2000)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..n {
                acc += diffs[rng.random_range(0..n)];
            }
            acc / n as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    means[(0.025 * 2000.0) as usize]
}

#[test]
fn attack_response_patterns_hold() {
    // large-cluster cell where the published grids show a clean separation:
    // the plain average blows past three times the robust error, while the
    // robust error under attack stays within twice its clean value
    let mut cfg = ExperimentConfig::new(ModelKind::Logistic, 101, 500, 30);
    cfg.methods = vec![Method::Average, Method::RoseK];
    cfg.replications = 48;

    cfg.alpha = 0.2;
    cfg.attack = AttackKind::ScaleStatistic { factor: -3.0 };
    let attacked = run_experiment(&cfg).unwrap();

    cfg.alpha = 0.0;
    cfg.attack = AttackKind::None;
    let clean = run_experiment(&cfg).unwrap();

    let avg_attacked = per_rep(&attacked, "average");
    let rose_attacked = per_rep(&attacked, "rose_k");
    let rose_clean = per_rep(&clean, "rose_k");

    let excess: Vec<f64> = avg_attacked
        .iter()
        .zip(&rose_attacked)
        .map(|(a, r)| a - 3.0 * r)
        .collect();
    let lower = bootstrap_lower(&excess, 1);
    assert!(lower > 0.0, "average vs 3x robust: lower bound {lower}");

    let headroom: Vec<f64> = rose_clean
        .iter()
        .zip(&rose_attacked)
        .map(|(c, a)| 2.0 * c - a)
        .collect();
    let lower = bootstrap_lower(&headroom, 2);
    assert!(lower > 0.0, "attacked vs 2x clean: lower bound {lower}");
}

#[test]
fn robust_error_shrinks_with_local_sample_size() {
    let mut cfg = ExperimentConfig::new(ModelKind::Logistic, 11, 200, 30);
    cfg.methods = vec![Method::RoseK];
    cfg.replications = 100;
    let mut means = Vec::new();
    for n in [200usize, 500, 1000] {
        cfg.n = n;
        let out = run_experiment(&cfg).unwrap();
        means.push(out.records[0].mean_rse);
    }
    assert!(
        means[0] > means[1] && means[1] > means[2],
        "no strict shrinkage: {means:?}"
    );
}

#[test]
fn median_only_correction_trails_the_kernel() {
    let mut cfg = ExperimentConfig::new(ModelKind::Logistic, 11, 300, 30);
    cfg.methods = vec![Method::RoseMed, Method::RoseK];
    cfg.replications = 60;
    let out = run_experiment(&cfg).unwrap();
    let med = per_rep(&out, "rose_med");
    let kernel = per_rep(&out, "rose_k");
    let diffs: Vec<f64> = med.iter().zip(&kernel).map(|(m, k)| m - k).collect();
    let lower = bootstrap_lower(&diffs, 3);
    assert!(lower > 0.0, "median-only should trail: lower bound {lower}");
}

#[test]
fn corrupted_center_with_scaled_covariates_stays_close_to_clean() {
    let mut cfg = ExperimentConfig::new(ModelKind::Logistic, 11, 1000, 30);
    cfg.methods = vec![Method::RoseRv];
    cfg.replications = 30;

    cfg.alpha = 0.1;
    cfg.attack = AttackKind::CovariateScale { factor: 10.0 };
    cfg.center_byzantine = true;
    let attacked = run_experiment(&cfg).unwrap();

    cfg.alpha = 0.0;
    cfg.attack = AttackKind::None;
    cfg.center_byzantine = false;
    let clean = run_experiment(&cfg).unwrap();

    let a = attacked.records[0].mean_rse;
    let c = clean.records[0].mean_rse;
    assert!(a <= 1.5 * c, "attacked {a} vs clean {c}");
}

#[test]
fn published_baseline_cells() {
    // the plain average in the clean m=11, n=1000 logistic cell
    let mut cfg = ExperimentConfig::new(ModelKind::Logistic, 11, 1000, 30);
    cfg.methods = vec![Method::Average, Method::OneStepAvg];
    cfg.replications = 40;
    let clean = run_experiment(&cfg).unwrap();
    let avg_clean = clean.records[0].mean_rse;
    assert!(
        (avg_clean - 0.1600).abs() <= 0.02,
        "average at alpha 0: {avg_clean}"
    );
    let one_step_clean = clean.records[1].mean_rse;

    // the averaged one-step blows up under the scaling attack
    cfg.alpha = 0.2;
    cfg.attack = AttackKind::ScaleStatistic { factor: -3.0 };
    cfg.methods = vec![Method::OneStepAvg];
    cfg.replications = 20;
    let attacked = run_experiment(&cfg).unwrap();
    assert!(
        attacked.records[0].mean_rse >= 3.0 * one_step_clean,
        "{} vs 3 x {one_step_clean}",
        attacked.records[0].mean_rse
    );

    // the median-only correction in the large attacked cell
    let mut cfg = ExperimentConfig::new(ModelKind::Logistic, 101, 1000, 30);
    cfg.methods = vec![Method::RoseMed];
    cfg.replications = 30;
    cfg.alpha = 0.2;
    cfg.attack = AttackKind::ScaleStatistic { factor: -3.0 };
    let med = run_experiment(&cfg).unwrap();
    assert!(
        (med.records[0].mean_rse - 0.0956).abs() <= 0.02,
        "rose_med m=101: {}",
        med.records[0].mean_rse
    );
}

#[test]
fn pipeline_is_deterministic_modulo_wall_clock() {
    let mut cfg = ExperimentConfig::new(ModelKind::Logistic, 5, 120, 3);
    cfg.methods = vec![Method::RoseK, Method::Average];
    cfg.replications = 5;
    cfg.alpha = 0.2;
    cfg.attack = AttackKind::ScaleStatistic { factor: -3.0 };

    let dirs = [
        std::env::temp_dir().join("rose-determinism-a"),
        std::env::temp_dir().join("rose-determinism-b"),
    ];
    let mut stripped = Vec::new();
    for dir in &dirs {
        let out = run_experiment(&cfg).unwrap();
        let paths = emit_results(&out.records, Some(&out.long), cfg.hash(), dir).unwrap();
        let text = std::fs::read_to_string(&paths.results).unwrap();
        // runtime_ms (column 11) is wall clock and the one field allowed to
        // differ between reruns
        let masked: Vec<String> = text
            .lines()
            .map(|line| {
                let mut fields: Vec<&str> = line.split(',').collect();
                if fields.len() == 12 {
                    fields[10] = "-";
                }
                fields.join(",")
            })
            .collect();
        stripped.push(masked.join("\n"));
    }
    assert_eq!(stripped[0], stripped[1]);
    assert_eq!(
        std::fs::read(dirs[0].join("manifest")).unwrap(),
        std::fs::read(dirs[1].join("manifest")).unwrap()
    );
    assert_eq!(
        std::fs::read(dirs[0].join("replications.csv")).unwrap(),
        std::fs::read(dirs[1].join("replications.csv")).unwrap()
    );
}
