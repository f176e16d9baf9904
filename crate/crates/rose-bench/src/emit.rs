//! Result emission: `results.csv`, the run `manifest`, and the optional
//! long-format per-replication file. Output bytes are a pure function of
//! the records, so identical runs rewrite identical files.

use std::fs;
use std::path::{Path, PathBuf};

use rose_core::error::{Error, Result};

use crate::experiment::{RepRow, ResultRecord};

pub const RESULTS_HEADER: &str =
    "method,alpha,m,n,p,K,replications,mean_rse,sd_rse,failures,runtime_ms,seed";

pub struct EmitPaths {
    pub results: PathBuf,
    pub manifest: PathBuf,
    pub long: Option<PathBuf>,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Write `results.csv` and a `manifest` with the config hash and artifact
/// version; optionally a `replications.csv` in long format.
pub fn emit_results(
    records: &[ResultRecord],
    long: Option<&[RepRow]>,
    config_hash: u64,
    output_dir: &Path,
) -> Result<EmitPaths> {
    fs::create_dir_all(output_dir).map_err(|e| io_err(output_dir, e))?;

    let results = output_dir.join("results.csv");
    let mut body = String::from(RESULTS_HEADER);
    body.push('\n');
    for r in records {
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.alpha,
            r.m,
            r.n,
            r.p,
            r.k,
            r.replications,
            r.mean_rse,
            r.sd_rse,
            r.failures,
            r.runtime_ms,
            r.seed
        ));
    }
    fs::write(&results, body).map_err(|e| io_err(&results, e))?;

    let manifest = output_dir.join("manifest");
    let manifest_body = format!(
        "artifact_version = {}\nconfig_hash = {:016x}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash
    );
    fs::write(&manifest, manifest_body).map_err(|e| io_err(&manifest, e))?;

    let long_path = match long {
        Some(rows) => {
            let path = output_dir.join("replications.csv");
            let mut body = String::from("method,replication,rse,failed\n");
            for row in rows {
                match row.rse {
                    Some(v) => body.push_str(&format!(
                        "{},{},{},false\n",
                        row.method, row.replication, v
                    )),
                    None => body.push_str(&format!("{},{},,true\n", row.method, row.replication)),
                }
            }
            fs::write(&path, body).map_err(|e| io_err(&path, e))?;
            Some(path)
        }
        None => None,
    };

    Ok(EmitPaths {
        results,
        manifest,
        long: long_path,
    })
}

/// Parse a `results.csv` back into records.
pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "unexpected results header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 12 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad {what} `{s}`"),
            })
        };
        out.push(ResultRecord {
            method: fields[0].to_string(),
            alpha: parse(fields[1], "alpha")?,
            m: parse(fields[2], "m")? as usize,
            n: parse(fields[3], "n")? as usize,
            p: parse(fields[4], "p")? as usize,
            k: parse(fields[5], "K")? as usize,
            replications: parse(fields[6], "replications")? as usize,
            mean_rse: parse(fields[7], "mean_rse")?,
            sd_rse: parse(fields[8], "sd_rse")?,
            failures: parse(fields[9], "failures")? as usize,
            runtime_ms: parse(fields[10], "runtime_ms")? as u64,
            seed: parse(fields[11], "seed")? as u64,
        });
    }
    Ok(out)
}
