use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rose_bench::config::{fnv1a64, load_config};
use rose_bench::emit::emit_results;
use rose_bench::experiment::{run_experiment, RepRow, ResultRecord};
use rose_bench::ingest::{dataset_to_csv, ingest_csv};
use rose_bench::suites::suite;
use rose_core::kernels::QuantileGrid;
use rose_core::models::ModelKind;

/// Environment variable naming the default output directory.
const OUTPUT_ENV: &str = "ROSE_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "rose-bench",
    about = "Byzantine-robust distributed estimation benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the variance-inflation constant and relative efficiency per K.
    DkTable {
        /// Comma-separated list of quantile counts.
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 5, 7, 10, 15, 20, 30, 50, 100])]
        k: Vec<usize>,
    },
    /// Run one experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config and ROSE_OUTPUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a pre-baked benchmark grid (table2..table7).
    Bench {
        #[arg(long)]
        suite: String,
        /// Replications per cell.
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a labeled CSV and optionally write a normalized copy.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        /// Name of the label column.
        #[arg(long)]
        label: String,
        /// Comma-separated feature columns; default is every other column.
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        /// Model the labels must satisfy (logistic enforces binary labels).
        #[arg(long)]
        model: Option<String>,
        /// Prepend a constant-1 column to the features.
        #[arg(long)]
        intercept: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn cmd_dk_table(ks: &[usize]) -> rose_core::Result<()> {
    println!("K,D_K,efficiency");
    for &k in ks {
        let grid = QuantileGrid::new(k)?;
        println!(
            "{},{:.3},{:.3}",
            k,
            grid.d_constant(),
            1.0 / grid.d_constant()
        );
    }
    Ok(())
}

fn cmd_simulate(config_path: &PathBuf, out: Option<PathBuf>) -> rose_core::Result<()> {
    let cfg = load_config(config_path)?;
    let out_dir = out
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone());
    let output = run_experiment(&cfg)?;
    let long = cfg.per_replication.then_some(output.long.as_slice());
    let paths = emit_results(&output.records, long, cfg.hash(), &out_dir)?;
    for record in &output.records {
        println!(
            "{}: mean_rse = {:.4}, sd = {:.4}, failures = {}",
            record.method, record.mean_rse, record.sd_rse, record.failures
        );
    }
    println!("wrote {}", paths.results.display());
    Ok(())
}

fn cmd_bench(name: &str, reps: usize, out: Option<PathBuf>) -> rose_core::Result<()> {
    let cells = suite(name, reps)?;
    let out_dir = out.unwrap_or_else(default_output_dir).join(name);
    let mut records: Vec<ResultRecord> = Vec::new();
    let mut long: Vec<RepRow> = Vec::new();
    let mut canonical = String::new();
    let total = cells.len();
    for (i, cell) in cells.iter().enumerate() {
        eprintln!(
            "[{}/{}] m={} n={} alpha={} ...",
            i + 1,
            total,
            cell.m,
            cell.n,
            cell.alpha
        );
        canonical.push_str(&cell.canonical_string());
        let output = run_experiment(cell)?;
        for record in &output.records {
            println!(
                "m={} n={} alpha={} {}: mean_rse = {:.4} ({:.4}), failures = {}",
                cell.m,
                cell.n,
                cell.alpha,
                record.method,
                record.mean_rse,
                record.sd_rse,
                record.failures
            );
        }
        records.extend(output.records);
        long.extend(output.long);
    }
    let paths = emit_results(&records, None, fnv1a64(canonical.as_bytes()), &out_dir)?;
    println!("wrote {}", paths.results.display());
    Ok(())
}

fn cmd_ingest(
    csv: &PathBuf,
    label: &str,
    features: Option<Vec<String>>,
    model: Option<String>,
    intercept: bool,
    out: Option<PathBuf>,
) -> rose_core::Result<()> {
    let model_kind = match model.as_deref() {
        None => None,
        Some("logistic") => Some(ModelKind::Logistic),
        Some("poisson") => Some(ModelKind::Poisson),
        Some("gaussian") => Some(ModelKind::Gaussian),
        Some(other) => {
            return Err(rose_core::Error::InvalidConfig(format!(
                "unknown model `{other}`"
            )))
        }
    };
    let mut dataset = ingest_csv(csv, label, features.as_deref(), model_kind)?;
    if intercept {
        dataset = dataset.with_intercept();
    }
    println!(
        "{}: {} rows, {} features",
        csv.display(),
        dataset.rows(),
        dataset.dim()
    );
    if let Some(out_path) = out {
        dataset_to_csv(&dataset, label, &out_path)?;
        println!("wrote {}", out_path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::DkTable { k } => cmd_dk_table(&k),
        Command::Simulate { config, out } => cmd_simulate(&config, out),
        Command::Bench { suite, reps, out } => cmd_bench(&suite, reps, out),
        Command::Ingest {
            csv,
            label,
            features,
            model,
            intercept,
            out,
        } => cmd_ingest(&csv, &label, features, model, intercept, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
