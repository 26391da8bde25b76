//! Summary tables over produced artifacts.
//!
//! Scans a directory for run logs (`*.json` with a loss array), ablation
//! CSVs and speedup tables, and emits one row per data point under the
//! stable schema `v,m,sparsity,ln_k,speedup,final_loss,seed`.

use crate::{validation, write_file, CliError, CliResult};
use clap::Args;
use serde::Deserialize;
use std::fs;
use std::path::PathBuf;
use vnm_core::selection::{ln_k, sparsity_of, SpeedupTable, TableKey};

#[derive(Args)]
pub struct ReportArgs {
    /// Directory holding run.json / ablation.csv / speedups.csv artifacts.
    #[arg(long)]
    pub inputs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also print the rows as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Deserialize)]
struct RunMetaIn {
    v: u64,
    m: u64,
    seed: u64,
    final_loss: f32,
}

#[derive(Deserialize)]
struct RunLogIn {
    meta: RunMetaIn,
    loss: Vec<f32>,
}

#[derive(Debug, serde::Serialize)]
struct Row {
    v: String,
    m: u64,
    sparsity: f64,
    ln_k: f64,
    speedup: Option<f64>,
    final_loss: Option<f32>,
    seed: Option<u64>,
}

fn fmt_opt<T: std::fmt::Display>(x: &Option<T>) -> String {
    match x {
        Some(v) => v.to_string(),
        None => String::new(),
    }
}

pub fn run(args: ReportArgs) -> CliResult<()> {
    let entries = fs::read_dir(&args.inputs)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", args.inputs.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();

    // one speedup table (if present) feeds the speedup column of run rows
    let mut table: Option<SpeedupTable> = None;
    for path in &paths {
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
            if text.starts_with("v,m,speedup") {
                table = Some(SpeedupTable::from_csv(&text, 1)?);
            }
        }
    }
    let lookup = |v: u64, m: u64| -> Option<f64> {
        let table = table.as_ref()?;
        if m == 4 {
            table.get(&TableKey::Baseline24)
        } else {
            table.get(&TableKey::Pattern { v, m })
        }
    };

    let mut rows: Vec<Row> = Vec::new();
    for path in &paths {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Validation(format!("reading {}: {e}", path.display()))
                })?;
                let Ok(log) = serde_json::from_str::<RunLogIn>(&text) else {
                    continue; // not a run log (e.g. perm.json, manifest.json)
                };
                let _ = log.loss;
                rows.push(Row {
                    v: log.meta.v.to_string(),
                    m: log.meta.m,
                    sparsity: sparsity_of(log.meta.m),
                    ln_k: ln_k(log.meta.v, log.meta.m)?,
                    speedup: lookup(log.meta.v, log.meta.m),
                    final_loss: Some(log.meta.final_loss),
                    seed: Some(log.meta.seed),
                });
            }
            Some("csv") => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Validation(format!("reading {}: {e}", path.display()))
                })?;
                if text.starts_with("strategy,seed,v,m,final_loss") {
                    for line in text.lines().skip(1) {
                        if line.trim().is_empty() {
                            continue;
                        }
                        let fields: Vec<&str> = line.split(',').collect();
                        if fields.len() != 5 {
                            return validation(format!("bad ablation row: {line:?}"));
                        }
                        let v: u64 = fields[2].parse().map_err(|_| {
                            CliError::Validation(format!("bad v in ablation row {line:?}"))
                        })?;
                        let m: u64 = fields[3].parse().map_err(|_| {
                            CliError::Validation(format!("bad m in ablation row {line:?}"))
                        })?;
                        rows.push(Row {
                            v: v.to_string(),
                            m,
                            sparsity: sparsity_of(m),
                            ln_k: ln_k(v, m)?,
                            speedup: lookup(v, m),
                            final_loss: Some(fields[4].parse().map_err(|_| {
                                CliError::Validation(format!("bad loss in ablation row {line:?}"))
                            })?),
                            seed: Some(fields[1].parse().map_err(|_| {
                                CliError::Validation(format!("bad seed in ablation row {line:?}"))
                            })?),
                        });
                    }
                }
            }
            _ => {}
        }
    }
    // a bare speedup table still yields Pareto-point rows
    if rows.is_empty() {
        if let Some(table) = &table {
            for (key, &speedup) in table.iter() {
                let (v_label, m) = match key {
                    TableKey::Baseline24 => ("*".to_string(), 4),
                    TableKey::Pattern { v, m } => (v.to_string(), *m),
                };
                rows.push(Row {
                    ln_k: key.ln_k(),
                    v: v_label,
                    m,
                    sparsity: sparsity_of(m),
                    speedup: Some(speedup),
                    final_loss: None,
                    seed: None,
                });
            }
        }
    }
    if rows.is_empty() {
        return validation(format!(
            "no artifacts found in {} (expected run logs, ablation CSVs or speedup tables)",
            args.inputs.display()
        ));
    }

    let mut csv = String::from("v,m,sparsity,ln_k,speedup,final_loss,seed\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.v,
            row.m,
            row.sparsity,
            row.ln_k,
            fmt_opt(&row.speedup),
            fmt_opt(&row.final_loss),
            fmt_opt(&row.seed),
        ));
    }
    write_file(&args.out, csv.as_bytes())?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    }
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}
