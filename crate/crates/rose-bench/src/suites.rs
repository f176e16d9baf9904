//! Pre-baked benchmark grids mirroring the synthetic study designs.

use rose_core::byzantine::AttackKind;
use rose_core::error::{Error, Result};
use rose_core::models::ModelKind;

use crate::config::{ExperimentConfig, Method};

const MS: [usize; 3] = [11, 31, 101];
const NS: [usize; 4] = [200, 300, 500, 1000];

fn grid(
    model: ModelKind,
    attack: AttackKind,
    alphas: &[f64],
    center_byzantine: bool,
    methods: &[Method],
    reps: usize,
) -> Vec<ExperimentConfig> {
    let mut cells = Vec::new();
    for &m in &MS {
        for &n in &NS {
            for &alpha in alphas {
                let mut cfg = ExperimentConfig::new(model, m, n, 30);
                cfg.alpha = alpha;
                cfg.attack = if alpha == 0.0 { AttackKind::None } else { attack };
                cfg.center_byzantine = center_byzantine && alpha > 0.0;
                cfg.methods = methods.to_vec();
                cfg.replications = reps;
                cells.push(cfg);
            }
        }
    }
    cells
}

/// The cell list for a named suite.
pub fn suite(name: &str, reps: usize) -> Result<Vec<ExperimentConfig>> {
    let honest = [
        Method::Average,
        Method::OneStepAvg,
        Method::RoseMed,
        Method::RoseK,
    ];
    let cells = match name {
        "table2" => grid(
            ModelKind::Logistic,
            AttackKind::ScaleStatistic { factor: -3.0 },
            &[0.0, 0.1, 0.2],
            false,
            &honest,
            reps,
        ),
        "table3" => grid(
            ModelKind::Poisson,
            AttackKind::PoissonNegate,
            &[0.0, 0.1, 0.2],
            false,
            &honest,
            reps,
        ),
        "table4" => grid(
            ModelKind::Logistic,
            AttackKind::LabelFlip,
            &[0.1, 0.2],
            true,
            &[Method::RoseRv, Method::RoseK],
            reps,
        ),
        "table5" => grid(
            ModelKind::Logistic,
            AttackKind::CovariateScale { factor: 10.0 },
            &[0.1, 0.2],
            true,
            &[Method::RoseRv],
            reps,
        ),
        "table6" => grid(
            ModelKind::Poisson,
            AttackKind::PoissonNegate,
            &[0.1, 0.2],
            true,
            &[Method::RoseRv, Method::RoseK],
            reps,
        ),
        "table7" => grid(
            ModelKind::Poisson,
            AttackKind::CovariateScale { factor: 10.0 },
            &[0.1, 0.2],
            true,
            &[Method::RoseRv],
            reps,
        ),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown suite `{other}` (expected table2..table7)"
            )))
        }
    };
    Ok(cells)
}
