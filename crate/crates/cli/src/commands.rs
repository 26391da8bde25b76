//! The single-step subcommands.

use crate::{validation, write_file, CliError, CliResult};
use clap::Args;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use vnm_core::bench::{run_bench, BenchSize};
use vnm_core::importance::{abs_scores, ria_scores, ActivationNorms};
use vnm_core::io;
use vnm_core::mask::SparseMask;
use vnm_core::matrix::DenseMatrix;
use vnm_core::packed;
use vnm_core::pattern::VnmPattern;
use vnm_core::permutation::{alternate_cp, apply_pair};
use vnm_core::pruner::{apply_mask, pad_weights, prune_vnm};
use vnm_core::selection::{sift, SelectionQuery, SpeedupTable};
use vnm_core::train::{
    self, train, Criterion, ModelKind, Strategy, ToyTask, TrainConfig, TrainMode,
};

fn read_weights(path: &Path) -> CliResult<DenseMatrix> {
    Ok(io::read_matrix_auto(path)?)
}

fn read_acts(path: Option<&PathBuf>, cols: usize, exponent_a: f32) -> CliResult<ActivationNorms> {
    match path {
        Some(p) => {
            let norms = io::read_vector_auto(p)?;
            Ok(ActivationNorms::new(norms, exponent_a)?)
        }
        None => Ok(ActivationNorms::uniform(cols, exponent_a)),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| CliError::Validation(format!("bad {what} entry {tok:?}")))
        })
        .collect()
}

/// Seeds accept `0..4` (inclusive) or a comma list.
fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("bad seed range {s:?}")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("bad seed range {s:?}")))?;
        if hi < lo {
            return validation(format!("empty seed range {s:?}"));
        }
        Ok((lo..=hi).collect())
    } else {
        parse_list(s, "seed")
    }
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SelectArgs {
    /// Speedup table CSV (header v,m,speedup; v=* marks the 2:4 baseline).
    #[arg(long)]
    pub table: PathBuf,
    /// Minimum acceptable speedup.
    #[arg(long)]
    pub threshold: f64,
    /// Candidate V values, comma separated.
    #[arg(long, default_value = "16,32,64,128")]
    pub vset: String,
    /// Largest M considered.
    #[arg(long, default_value_t = 16)]
    pub mmax: u64,
    /// Batch-size tag carried by the table.
    #[arg(long, default_value_t = 1)]
    pub batch_size: u32,
    /// Emit the full trace as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

pub fn select(args: SelectArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.table)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", args.table.display())))?;
    let table = SpeedupTable::from_csv(&text, args.batch_size)?;
    let query = SelectionQuery::new(args.threshold, table)?
        .with_candidates(parse_list(&args.vset, "vset")?, args.mmax)?;
    let sifted = sift(&query)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&sifted)?);
    } else {
        println!(
            "selected {} (speedup {:.3}, ln K {:.5})",
            sifted.selected, sifted.speedup, sifted.ln_k
        );
        for s in &sifted.survivors {
            println!(
                "  survivor {} speedup {:.3} ln K {:.5}",
                s.key, s.speedup, s.ln_k
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// prune
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub v: usize,
    #[arg(long)]
    pub m: usize,
    /// Importance criterion: abs or ria.
    #[arg(long, default_value = "ria")]
    pub criterion: String,
    /// Activation norms (VNMT 1-D tensor or single CSV row).
    #[arg(long)]
    pub acts: Option<PathBuf>,
    /// Activation exponent a in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub a: f32,
    #[arg(long)]
    pub out_mask: PathBuf,
    #[arg(long)]
    pub out_weights: PathBuf,
}

pub fn prune(args: PruneArgs) -> CliResult<()> {
    let pattern = VnmPattern::new(args.v, args.m)?;
    let w = read_weights(&args.weights)?;
    let (padded, record) = pad_weights(&w, &pattern);
    let criterion: Criterion = args.criterion.parse()?;
    let scores = match criterion {
        Criterion::Abs => abs_scores(&padded),
        Criterion::Ria => {
            let acts = read_acts(args.acts.as_ref(), w.cols(), args.a)?;
            if acts.len() != w.cols() {
                return validation(format!(
                    "activation norms have {} entries, weights have {} columns",
                    acts.len(),
                    w.cols()
                ));
            }
            ria_scores(&padded, &acts.padded(padded.cols()))?
        }
    };
    let mask = prune_vnm(&scores, &pattern)?;
    let wp = apply_mask(&padded, &mask)?;
    write_file(&args.out_mask, &io::encode_matrix(&mask.to_matrix()))?;
    write_file(&args.out_weights, &io::encode_matrix(&wp))?;
    if !record.is_noop() {
        println!(
            "padded {}x{} -> {}x{}",
            record.original_rows, record.original_cols, record.padded_rows, record.padded_cols
        );
    }
    println!(
        "pruned to {pattern}: density {:.4} ({} of {} kept), retained score {:.4}",
        mask.density(),
        mask.popcount(),
        padded.rows() * padded.cols(),
        vnm_core::pruner::retained_score(&scores, &mask)?
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// permute
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct PermuteArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub v: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub acts: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub a: f32,
    /// Alternating-optimization rounds.
    #[arg(long, default_value_t = 2)]
    pub iters: usize,
    #[arg(long)]
    pub out_perm: PathBuf,
    #[arg(long)]
    pub out_weights: PathBuf,
}

pub fn permute(args: PermuteArgs) -> CliResult<()> {
    let pattern = VnmPattern::new(args.v, args.m)?;
    let w = read_weights(&args.weights)?;
    let (padded, record) = pad_weights(&w, &pattern);
    let acts = read_acts(args.acts.as_ref(), w.cols(), args.a)?;
    if acts.len() != w.cols() {
        return validation(format!(
            "activation norms have {} entries, weights have {} columns",
            acts.len(),
            w.cols()
        ));
    }
    let acts = acts.padded(padded.cols());
    let result = alternate_cp(&padded, &pattern, &acts, args.iters)?;
    let permuted = apply_pair(&padded, &result.pair)?;
    write_file(
        &args.out_perm,
        serde_json::to_string_pretty(&result.pair)?.as_bytes(),
    )?;
    write_file(&args.out_weights, &io::encode_matrix(&permuted))?;
    if !record.is_noop() {
        println!(
            "padded {}x{} -> {}x{}",
            record.original_rows, record.original_cols, record.padded_rows, record.padded_cols
        );
    }
    let first = result.trace.first().copied().unwrap_or(0.0);
    let last = result.trace.last().copied().unwrap_or(0.0);
    println!(
        "cp objective {:.6} -> {:.6} over {} half-steps (gain {:+.3}%)",
        first,
        last,
        result.trace.len() - 1,
        if first > 0.0 {
            100.0 * (last - first) / first
        } else {
            0.0
        }
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// pack
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct PackArgs {
    /// Masked weights (zero off-mask).
    #[arg(long)]
    pub weights: PathBuf,
    /// 0/1 mask tensor; inferred from nonzeros when omitted.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub v: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn pack(args: PackArgs) -> CliResult<()> {
    let pattern = VnmPattern::new(args.v, args.m)?;
    let w = read_weights(&args.weights)?;
    let bits: Vec<bool> = match &args.mask {
        Some(path) => {
            let mask_matrix = io::read_matrix_auto(path)?;
            if mask_matrix.shape() != w.shape() {
                return validation(format!(
                    "mask is {}x{}, weights are {}x{}",
                    mask_matrix.rows(),
                    mask_matrix.cols(),
                    w.rows(),
                    w.cols()
                ));
            }
            mask_matrix.values().iter().map(|&x| x > 0.5).collect()
        }
        None => w.values().iter().map(|&x| x != 0.0).collect(),
    };
    let mask = SparseMask::from_bits(pattern, w.rows(), w.cols(), bits)?;
    let packed = packed::pack(&w, &mask)?;
    write_file(&args.out, &io::encode_packed(&packed))?;
    let dense_bytes = w.rows() * w.cols() * 4;
    let packed_bytes = packed.a_n().len() * 4 + packed.a_i1().len() + packed.a_i2().len();
    println!(
        "packed {}x{} at {pattern}: {} values, {:.1}% of dense bytes",
        w.rows(),
        w.cols(),
        packed.a_n().len(),
        100.0 * packed_bytes as f64 / dense_bytes as f64
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// spmm-check
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SpmmCheckArgs {
    #[arg(long)]
    pub packed: PathBuf,
    /// Columns of the random test operand.
    #[arg(long, default_value_t = 8)]
    pub xcols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Acceptable relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

pub fn spmm_check(args: SpmmCheckArgs) -> CliResult<()> {
    let p = io::read_packed(&args.packed)?;
    let x = DenseMatrix::random(p.cols(), args.xcols, args.seed);
    let dense = packed::unpack(&p)?.matmul(&x)?;
    let (sparse, mults) = packed::spmm_counted(&p, &x)?;
    let rel = sparse.max_rel_diff(&dense)?;
    let expected_mults = packed::count_mults(&p, args.xcols);
    let dense_mults = (p.rows() * p.cols() * args.xcols) as u64;
    println!(
        "spmm vs dense: max rel error {rel:.3e}; mults {mults} (expected {expected_mults}), {:.4} of dense {dense_mults}",
        mults as f64 / dense_mults as f64
    );
    if mults != expected_mults {
        return validation(format!(
            "multiply count {mults} differs from closed form {expected_mults}"
        ));
    }
    if rel > args.tol {
        return validation(format!(
            "relative error {rel:.3e} exceeds tolerance {:.1e}",
            args.tol
        ));
    }
    println!("ok");
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated rows x cols x xcols triples, e.g. 1024x1024x1024.
    #[arg(long)]
    pub sizes: String,
    /// Comma-separated V:N:M patterns, e.g. 64:2:5,64:2:8.
    #[arg(long)]
    pub patterns: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Batch-size tag recorded in the table.
    #[arg(long, default_value_t = 1)]
    pub batch_size: u32,
    /// Also write the per-cell timing detail as JSON.
    #[arg(long)]
    pub detail: Option<PathBuf>,
}

pub fn bench(args: BenchArgs) -> CliResult<()> {
    let sizes = args
        .sizes
        .split(',')
        .map(|s| BenchSize::parse(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    let patterns = args
        .patterns
        .split(',')
        .map(|s| VnmPattern::parse(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.is_empty() || patterns.is_empty() {
        return validation("bench needs at least one size and one pattern");
    }
    let report = run_bench(&sizes, &patterns, args.seed)?;
    for cell in &report.cells {
        println!(
            "{}x{} (x {} cols) {}:2:{}: dense {:.4}s spmm {:.4}s speedup {:.3} (median of {})",
            cell.size.rows,
            cell.size.cols,
            cell.size.x_cols,
            cell.pattern_v,
            cell.pattern_m,
            cell.dense_median_s,
            cell.spmm_median_s,
            cell.speedup,
            cell.runs
        );
    }
    let table = report.to_speedup_table(args.batch_size)?;
    write_file(&args.out, table.to_csv().as_bytes())?;
    if let Some(detail) = &args.detail {
        write_file(detail, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train-toy / ablate
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct TrainToyArgs {
    /// LoRA mask schedule A..E (LoRA mode only).
    #[arg(long, default_value = "E")]
    pub strategy: String,
    #[arg(long, default_value_t = 16)]
    pub v: usize,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2e-2)]
    pub lr: f64,
    #[arg(long, default_value_t = 2e-4)]
    pub lambda: f64,
    /// Mask update interval (iterations for LoRA, epochs for SR-STE).
    #[arg(long, default_value_t = 20)]
    pub interval: usize,
    /// lora | full-fixed | full-srste
    #[arg(long, default_value = "lora")]
    pub mode: String,
    /// linear | mlp
    #[arg(long, default_value = "linear")]
    pub model: String,
    /// abs | ria; defaults per mode (ria, except abs for full-srste).
    #[arg(long)]
    pub criterion: Option<String>,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
pub struct RunMeta {
    pub v: usize,
    pub m: usize,
    pub mode: String,
    pub strategy: Option<String>,
    pub seed: u64,
    pub iters: usize,
    pub final_loss: f32,
}

#[derive(Serialize)]
struct RunLog<'a> {
    meta: &'a RunMeta,
    #[serde(flatten)]
    run: &'a train::TrainRun,
}

pub fn build_config(args: &TrainToyArgs, pattern: VnmPattern) -> CliResult<TrainConfig> {
    let mut config = match args.mode.as_str() {
        "lora" => {
            let strategy: Strategy = args.strategy.parse()?;
            TrainConfig::lora(pattern, strategy, args.seed)
        }
        "full-fixed" => TrainConfig::full_fixed(pattern, args.seed),
        "full-srste" => TrainConfig::full_srste(pattern, args.seed),
        other => {
            return validation(format!(
                "mode must be lora, full-fixed or full-srste, got {other:?}"
            ))
        }
    };
    config.learning_rate = args.lr;
    config.srste_lambda = args.lambda;
    config.total_iters = args.iters;
    config.mask_update_interval = args.interval;
    config.batch_size = args.batch;
    if let Some(c) = &args.criterion {
        config.criterion = c.parse()?;
    }
    Ok(config)
}

pub fn train_toy(args: TrainToyArgs) -> CliResult<()> {
    let pattern = VnmPattern::new(args.v, args.m)?;
    let kind = match args.model.as_str() {
        "linear" => ModelKind::Linear,
        "mlp" => ModelKind::Mlp,
        other => return validation(format!("model must be linear or mlp, got {other:?}")),
    };
    let config = build_config(&args, pattern)?;
    let task = ToyTask::new(kind, pattern, args.seed, args.samples)?;
    let run = train(&task, &config)?;
    let meta = RunMeta {
        v: args.v,
        m: args.m,
        mode: args.mode.clone(),
        strategy: matches!(config.mode, TrainMode::Lora(_)).then(|| args.strategy.to_uppercase()),
        seed: args.seed,
        iters: args.iters,
        final_loss: run.final_loss(),
    };
    write_file(
        &args.out,
        serde_json::to_string_pretty(&RunLog {
            meta: &meta,
            run: &run,
        })?
        .as_bytes(),
    )?;
    println!(
        "{} {} iters seed {}: loss {:.5} -> {:.5} (full-data final {:.5})",
        args.mode,
        args.iters,
        args.seed,
        run.loss.first().copied().unwrap_or(f32::NAN),
        run.loss.last().copied().unwrap_or(f32::NAN),
        run.final_loss()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Args)]
pub struct AblateArgs {
    #[arg(long, default_value = "A,B,C,D,E")]
    pub strategies: String,
    /// `0..4` (inclusive) or a comma list.
    #[arg(long, default_value = "0..4")]
    pub seeds: String,
    #[arg(long, default_value_t = 16)]
    pub v: usize,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 2e-2)]
    pub lr: f64,
    #[arg(long, default_value_t = 20)]
    pub interval: usize,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn ablate(args: AblateArgs) -> CliResult<()> {
    let pattern = VnmPattern::new(args.v, args.m)?;
    let mut strategies: Vec<Strategy> = args
        .strategies
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()?;
    strategies.sort_by_key(|s| format!("{s}"));
    strategies.dedup();
    let seeds = parse_seeds(&args.seeds)?;
    if strategies.is_empty() || seeds.is_empty() {
        return validation("ablate needs at least one strategy and one seed");
    }
    let mut csv = String::from("strategy,seed,v,m,final_loss\n");
    for &strategy in &strategies {
        for &seed in &seeds {
            let task = ToyTask::new(ModelKind::Linear, pattern, seed, args.samples)?;
            let mut config = TrainConfig::lora(pattern, strategy, seed);
            config.total_iters = args.iters;
            config.learning_rate = args.lr;
            config.mask_update_interval = args.interval;
            let run = train(&task, &config)?;
            csv.push_str(&format!(
                "{strategy},{seed},{},{},{}\n",
                args.v,
                args.m,
                run.final_loss()
            ));
            println!(
                "strategy {strategy} seed {seed}: final loss {:.5}",
                run.final_loss()
            );
        }
    }
    write_file(&args.out, csv.as_bytes())?;
    println!("wrote {}", args.out.display());
    Ok(())
}
