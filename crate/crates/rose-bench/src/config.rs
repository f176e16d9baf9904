//! Experiment configuration: a sectioned plain-text `key = value` format.
//!
//! Grammar (see the repository README for the worked example):
//!   - `#` starts a comment, blank lines are ignored
//!   - `[experiment]` and `[attack]` open sections
//!   - every other line is `key = value`
//!
//! The canonical serialization of a parsed config is hashed (FNV-1a) into
//! the run manifest so result files can be traced back to their inputs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rose_core::byzantine::{AttackKind, AttackSpec};
use rose_core::error::{Error, Result};
use rose_core::models::ModelKind;
use rose_core::simnet::{ClusterConfig, HessianWire};

/// Estimation methods addressable from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    /// Coordinate-wise mean of the local estimates.
    Average,
    /// Averaged one-step correction (non-robust).
    OneStepAvg,
    /// One-step correction from coordinate-wise medians.
    RoseMed,
    /// Variance-reduced protocol with an honest center.
    RoseK,
    /// Variance-reduced protocol tolerating a Byzantine center.
    RoseRv,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Average,
        Method::OneStepAvg,
        Method::RoseMed,
        Method::RoseK,
        Method::RoseRv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Average => "average",
            Method::OneStepAvg => "one_step_avg",
            Method::RoseMed => "rose_med",
            Method::RoseK => "rose_k",
            Method::RoseRv => "rose_rv",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub alpha: f64,
    pub attack: AttackKind,
    pub center_byzantine: bool,
    pub center_has_data: bool,
    pub triangular_wire: bool,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub per_replication: bool,
}

impl ExperimentConfig {
    /// A minimal runnable configuration; callers override fields as needed.
    pub fn new(model: ModelKind, m: usize, n: usize, p: usize) -> Self {
        Self {
            model,
            m,
            n,
            p,
            k: 10,
            alpha: 0.0,
            attack: AttackKind::None,
            center_byzantine: false,
            center_has_data: true,
            triangular_wire: false,
            methods: vec![Method::RoseK],
            replications: 100,
            base_seed: 20240615,
            output_dir: PathBuf::from("results"),
            per_replication: false,
        }
    }

    pub fn attack_spec(&self) -> AttackSpec {
        AttackSpec {
            kind: self.attack,
            alpha: self.alpha,
            center_may_be_byzantine: self.center_byzantine,
        }
    }

    pub fn cluster_config(&self, seed: u64) -> ClusterConfig {
        let mut cc = ClusterConfig::new(self.m, self.n, seed, self.attack_spec());
        if self.triangular_wire {
            cc.hessian_wire = HessianWire::Triangular;
        }
        cc.center_has_data = self.center_has_data;
        cc
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods requested".into()));
        }
        let unique: BTreeSet<_> = self.methods.iter().collect();
        if unique.len() != self.methods.len() {
            return Err(Error::InvalidConfig("duplicate method requested".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.p < 2 {
            return Err(Error::InvalidConfig("p must be >= 2".into()));
        }
        self.attack_spec().validate()?;
        Ok(())
    }

    /// Fixed-order serialization; equal configs hash equally.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model.name());
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "attack = {}", attack_name(self.attack));
        if let AttackKind::ScaleStatistic { factor } | AttackKind::CovariateScale { factor } =
            self.attack
        {
            let _ = writeln!(s, "factor = {factor}");
        }
        let _ = writeln!(s, "center_byzantine = {}", self.center_byzantine);
        let _ = writeln!(s, "center_has_data = {}", self.center_has_data);
        let _ = writeln!(s, "triangular_wire = {}", self.triangular_wire);
        let names: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let _ = writeln!(s, "methods = {}", names.join(", "));
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "base_seed = {}", self.base_seed);
        let _ = writeln!(s, "per_replication = {}", self.per_replication);
        s
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical_string().as_bytes())
    }
}

pub fn attack_name(kind: AttackKind) -> &'static str {
    match kind {
        AttackKind::None => "none",
        AttackKind::ScaleStatistic { .. } => "scale_statistic",
        AttackKind::Arbitrary => "arbitrary",
        AttackKind::LabelFlip => "label_flip",
        AttackKind::CovariateScale { .. } => "covariate_scale",
        AttackKind::PoissonNegate => "poisson_negate",
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Parse {
            line,
            message: format!("expected true/false, got `{value}`"),
        }),
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid number `{value}`"),
    })
}

/// Parse the sectioned key=value format.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(ModelKind::Logistic, 11, 1000, 30);
    cfg.methods.clear();
    let mut section = String::new();
    let mut factor: Option<f64> = None;
    let mut attack_kind: Option<&str> = None;
    let mut attack_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Parse {
                    line: line_no,
                    message: "unterminated section header".into(),
                });
            }
            section = line[1..line.len() - 1].trim().to_string();
            if section != "experiment" && section != "attack" {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown section `{section}`"),
                });
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        match (section.as_str(), key) {
            ("experiment", "model") => {
                cfg.model = match value {
                    "logistic" => ModelKind::Logistic,
                    "poisson" => ModelKind::Poisson,
                    "gaussian" => ModelKind::Gaussian,
                    _ => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("unknown model `{value}`"),
                        })
                    }
                };
            }
            ("experiment", "m") => cfg.m = parse_num(value, line_no)?,
            ("experiment", "n") => cfg.n = parse_num(value, line_no)?,
            ("experiment", "p") => cfg.p = parse_num(value, line_no)?,
            ("experiment", "k") => cfg.k = parse_num(value, line_no)?,
            ("experiment", "alpha") => cfg.alpha = parse_num(value, line_no)?,
            ("experiment", "replications") => cfg.replications = parse_num(value, line_no)?,
            ("experiment", "base_seed") => cfg.base_seed = parse_num(value, line_no)?,
            ("experiment", "output_dir") => cfg.output_dir = PathBuf::from(value),
            ("experiment", "per_replication") => cfg.per_replication = parse_bool(value, line_no)?,
            ("experiment", "triangular_wire") => {
                cfg.triangular_wire = parse_bool(value, line_no)?
            }
            ("experiment", "methods") => {
                for name in value.split(',') {
                    let name = name.trim();
                    let method = Method::parse(name).ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: format!("unknown method `{name}`"),
                    })?;
                    cfg.methods.push(method);
                }
            }
            ("attack", "kind") => {
                attack_kind = Some(match value {
                    "none" => "none",
                    "scale_statistic" => "scale_statistic",
                    "arbitrary" => "arbitrary",
                    "label_flip" => "label_flip",
                    "covariate_scale" => "covariate_scale",
                    "poisson_negate" => "poisson_negate",
                    _ => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("unknown attack kind `{value}`"),
                        })
                    }
                });
                attack_line = line_no;
            }
            ("attack", "factor") => factor = Some(parse_num(value, line_no)?),
            ("attack", "center_byzantine") => {
                cfg.center_byzantine = parse_bool(value, line_no)?
            }
            ("attack", "center_has_data") => cfg.center_has_data = parse_bool(value, line_no)?,
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown key `{key}` in section `[{section}]`"),
                });
            }
        }
    }

    cfg.attack = match attack_kind.unwrap_or("none") {
        "none" => AttackKind::None,
        "arbitrary" => AttackKind::Arbitrary,
        "label_flip" => AttackKind::LabelFlip,
        "poisson_negate" => AttackKind::PoissonNegate,
        "scale_statistic" => AttackKind::ScaleStatistic {
            factor: factor.ok_or(Error::Parse {
                line: attack_line,
                message: "scale_statistic needs `factor`".into(),
            })?,
        },
        "covariate_scale" => AttackKind::CovariateScale {
            factor: factor.ok_or(Error::Parse {
                line: attack_line,
                message: "covariate_scale needs `factor`".into(),
            })?,
        },
        _ => unreachable!(),
    };
    if cfg.methods.is_empty() {
        cfg.methods.push(Method::RoseK);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}
