//! The end-to-end workflow: select -> permute -> prune -> pack -> train,
//! driven by a TOML config, with every artifact hashed into a manifest.
//!
//! Training settings:
//! - TS1 (low budget): channel permutation, RIA pruning, fixed-mask
//!   full-parameter training;
//! - TS2 (unconstrained): ABS pruning, SR-STE dynamic-mask training;
//! - TS3 (memory constrained): three-stage LoRA.

use crate::commands::RunMeta;
use crate::manifest;
use crate::{validation, write_file, CliError, CliResult};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use vnm_core::importance::{abs_scores, ria_scores, ActivationNorms};
use vnm_core::io;
use vnm_core::matrix::DenseMatrix;
use vnm_core::packed;
use vnm_core::pattern::VnmPattern;
use vnm_core::permutation::{alternate_cp, apply_pair};
use vnm_core::pruner::{apply_mask, pad_weights, prune_vnm, retained_score, PaddingRecord};
use vnm_core::selection::{sift, SelectionQuery, Sifted, SpeedupTable};
use vnm_core::train::{
    three_stage_schedule, train, Criterion, StageSpan, Strategy, ToyTask, TrainConfig, TrainMode,
};

#[derive(Args)]
pub struct PipelineArgs {
    /// TOML config (see the repo README for the schema).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineConfig {
    /// TS1 | TS2 | TS3
    setting: String,
    seed: Option<u64>,
    input: InputSection,
    pattern: Option<PatternSection>,
    selection: Option<SelectionSection>,
    #[serde(default)]
    train: TrainSection,
    output: Option<OutputSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InputSection {
    weights: Option<PathBuf>,
    acts: Option<PathBuf>,
    synthetic: Option<SyntheticSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticSection {
    rows: usize,
    cols: usize,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternSection {
    v: usize,
    m: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionSection {
    table: PathBuf,
    threshold: f64,
    vset: Option<Vec<u64>>,
    mmax: Option<u64>,
    batch_size: Option<u32>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    iters: Option<usize>,
    lr: Option<f64>,
    lambda: Option<f64>,
    interval: Option<usize>,
    stage_fractions: Option<[f64; 3]>,
    strategy: Option<String>,
    criterion: Option<String>,
    lora_rank: Option<usize>,
    lora_alpha: Option<f64>,
    batch: Option<usize>,
    samples: Option<usize>,
    cp_iters: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: PathBuf,
}

#[derive(Serialize)]
struct CpSection {
    objective_before: f64,
    objective_after: f64,
    trace: Vec<f64>,
}

#[derive(Serialize)]
struct PipelineReport {
    setting: String,
    seed: u64,
    v: usize,
    m: usize,
    sparsity: f64,
    ln_k: f64,
    selection: Option<Sifted>,
    padding: PaddingRecord,
    cp: Option<CpSection>,
    mask_density: f64,
    retained_score: f64,
    schedule: Option<Vec<StageSpan>>,
    final_loss: f32,
    artifacts: Vec<String>,
}

pub fn run(args: PipelineArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", args.config.display())))?;
    let config: PipelineConfig =
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config: {e}")))?;

    let setting = config.setting.to_ascii_uppercase();
    if !matches!(setting.as_str(), "TS1" | "TS2" | "TS3") {
        return validation(format!(
            "unknown training setting {:?}; expected TS1, TS2 or TS3",
            config.setting
        ));
    }

    let mut seed = config.seed.unwrap_or(0);
    if let Ok(env_seed) = std::env::var("VNM_SEED") {
        seed = env_seed.parse().map_err(|_| {
            CliError::Validation(format!("VNM_SEED must be an integer, got {env_seed:?}"))
        })?;
    }

    let out_dir = args
        .out_dir
        .or(config.output.map(|o| o.dir))
        .ok_or_else(|| {
            CliError::Validation("no output directory (config [output].dir or --out-dir)".into())
        })?;
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Internal(format!("creating {}: {e}", out_dir.display())))?;

    // --- input -------------------------------------------------------------
    let config_dir = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let resolve = |p: &PathBuf| {
        if p.is_relative() {
            config_dir.join(p)
        } else {
            p.clone()
        }
    };
    let w = match (&config.input.weights, &config.input.synthetic) {
        (Some(path), None) => io::read_matrix_auto(&resolve(path))?,
        (None, Some(synth)) => DenseMatrix::random(synth.rows, synth.cols, synth.seed),
        (Some(_), Some(_)) => {
            return validation("config provides both input.weights and input.synthetic")
        }
        (None, None) => return validation("config needs input.weights or input.synthetic"),
    };
    let acts_raw = match &config.input.acts {
        Some(path) => Some(ActivationNorms::new(
            io::read_vector_auto(&resolve(path))?,
            0.5,
        )?),
        None => None,
    };
    if let Some(a) = &acts_raw {
        if a.len() != w.cols() {
            return validation(format!(
                "activation norms have {} entries, weights have {} columns",
                a.len(),
                w.cols()
            ));
        }
    }

    // --- pattern: fixed or sifted -------------------------------------------
    let (pattern, selection) = match (&config.pattern, &config.selection) {
        (Some(p), None) => (VnmPattern::new(p.v, p.m)?, None),
        (None, Some(sel)) => {
            let table_text = fs::read_to_string(resolve(&sel.table)).map_err(|e| {
                CliError::Validation(format!("reading {}: {e}", sel.table.display()))
            })?;
            let table = SpeedupTable::from_csv(&table_text, sel.batch_size.unwrap_or(1))?;
            let mut query = SelectionQuery::new(sel.threshold, table)?;
            if sel.vset.is_some() || sel.mmax.is_some() {
                query = query.with_candidates(
                    sel.vset.clone().unwrap_or_else(|| vec![16, 32, 64, 128]),
                    sel.mmax.unwrap_or(16),
                )?;
            }
            let sifted = sift(&query)?;
            let (v, m) = match sifted.selected {
                vnm_core::selection::TableKey::Baseline24 => (64, 4),
                vnm_core::selection::TableKey::Pattern { v, m } => (v as usize, m as usize),
            };
            println!(
                "selection: {} at speedup {:.3}",
                sifted.selected, sifted.speedup
            );
            (VnmPattern::new(v, m)?, Some(sifted))
        }
        (Some(_), Some(_)) => {
            return validation("config provides both [pattern] and [selection]; pick one")
        }
        (None, None) => return validation("config needs [pattern] or [selection]"),
    };

    // --- config hygiene ------------------------------------------------------
    if setting != "TS3" && (config.train.lora_rank.is_some() || config.train.lora_alpha.is_some()) {
        eprintln!("warning: LoRA rank/alpha are ignored under {setting} (full-parameter training)");
    }
    if setting != "TS3" && config.train.strategy.is_some() {
        eprintln!("warning: train.strategy is ignored under {setting}");
    }

    let mut artifacts: Vec<String> = Vec::new();
    let save = |name: &str, bytes: &[u8], artifacts: &mut Vec<String>| -> CliResult<()> {
        write_file(&out_dir.join(name), bytes)?;
        artifacts.push(name.to_string());
        Ok(())
    };

    // --- pad -----------------------------------------------------------------
    let (padded, padding) = pad_weights(&w, &pattern);
    let acts = match &acts_raw {
        Some(a) => a.padded(padded.cols()),
        None => ActivationNorms::uniform(padded.cols(), 0.5),
    };

    // --- TS1: channel permutation ---------------------------------------------
    let (w_work, cp) = if setting == "TS1" {
        let cp_iters = config.train.cp_iters.unwrap_or(2);
        let result = alternate_cp(&padded, &pattern, &acts, cp_iters)?;
        let permuted = apply_pair(&padded, &result.pair)?;
        save(
            "perm.json",
            serde_json::to_string_pretty(&result.pair)?.as_bytes(),
            &mut artifacts,
        )?;
        let section = CpSection {
            objective_before: result.trace[0],
            objective_after: *result.trace.last().expect("nonempty trace"),
            trace: result.trace,
        };
        println!(
            "cp: objective {:.6} -> {:.6}",
            section.objective_before, section.objective_after
        );
        (permuted, Some(section))
    } else {
        (padded.clone(), None)
    };

    // --- prune -----------------------------------------------------------------
    let criterion = match config.train.criterion.as_deref() {
        Some(c) => c.parse::<Criterion>()?,
        None => match setting.as_str() {
            "TS2" => Criterion::Abs,
            _ => Criterion::Ria,
        },
    };
    let scores = match criterion {
        Criterion::Abs => abs_scores(&w_work),
        Criterion::Ria => ria_scores(&w_work, &acts)?,
    };
    let mask = prune_vnm(&scores, &pattern)?;
    let retained = retained_score(&scores, &mask)?;
    let wp = apply_mask(&w_work, &mask)?;
    save(
        "mask.vnmt",
        &io::encode_matrix(&mask.to_matrix()),
        &mut artifacts,
    )?;
    save(
        "weights_pruned.vnmt",
        &io::encode_matrix(&wp),
        &mut artifacts,
    )?;
    println!(
        "pruned at {pattern} ({criterion:?}), density {:.4}",
        mask.density()
    );

    // --- pack --------------------------------------------------------------------
    let packed_form = packed::pack(&wp, &mask)?;
    save(
        "packed.vnmt",
        &io::encode_packed(&packed_form),
        &mut artifacts,
    )?;

    // --- train ----------------------------------------------------------------------
    let samples = config.train.samples.unwrap_or(256);
    let task = ToyTask::from_teacher(&w_work, pattern, seed, samples, 0.0)?;
    let mut train_config = match setting.as_str() {
        "TS1" => TrainConfig::full_fixed(pattern, seed),
        "TS2" => TrainConfig::full_srste(pattern, seed),
        _ => {
            let strategy = match &config.train.strategy {
                Some(s) => s.parse::<Strategy>()?,
                None => Strategy::E,
            };
            TrainConfig::lora(pattern, strategy, seed)
        }
    };
    train_config.criterion = criterion;
    train_config.total_iters = config.train.iters.unwrap_or(1000);
    if let Some(lr) = config.train.lr {
        train_config.learning_rate = lr;
    }
    if let Some(lambda) = config.train.lambda {
        train_config.srste_lambda = lambda;
    }
    if let Some(interval) = config.train.interval {
        train_config.mask_update_interval = interval;
    }
    if let Some(f) = config.train.stage_fractions {
        train_config.stage_fractions = (f[0], f[1], f[2]);
    }
    if setting == "TS3" {
        if let Some(rank) = config.train.lora_rank {
            train_config.lora_rank = rank;
        }
        if let Some(alpha) = config.train.lora_alpha {
            train_config.lora_alpha = alpha;
        }
    }
    if let Some(batch) = config.train.batch {
        train_config.batch_size = batch;
    }

    let schedule = match train_config.mode {
        TrainMode::Lora(Strategy::E) => Some(three_stage_schedule(
            train_config.total_iters,
            train_config.stage_fractions,
        )?),
        _ => None,
    };
    let run = train(&task, &train_config)?;
    let meta = RunMeta {
        v: pattern.v(),
        m: pattern.m(),
        mode: match train_config.mode {
            TrainMode::Lora(_) => "lora".into(),
            TrainMode::FullFixed => "full-fixed".into(),
            TrainMode::FullSrste => "full-srste".into(),
        },
        strategy: match train_config.mode {
            TrainMode::Lora(s) => Some(s.to_string()),
            _ => None,
        },
        seed,
        iters: train_config.total_iters,
        final_loss: run.final_loss(),
    };
    #[derive(Serialize)]
    struct RunLog<'a> {
        meta: &'a RunMeta,
        #[serde(flatten)]
        run: &'a vnm_core::train::TrainRun,
    }
    save(
        "run.json",
        serde_json::to_string_pretty(&RunLog {
            meta: &meta,
            run: &run,
        })?
        .as_bytes(),
        &mut artifacts,
    )?;
    println!(
        "train ({}): final full-data loss {:.6}",
        meta.mode,
        run.final_loss()
    );

    // --- report + manifest ------------------------------------------------------------
    let report = PipelineReport {
        setting: setting.clone(),
        seed,
        v: pattern.v(),
        m: pattern.m(),
        sparsity: vnm_core::selection::sparsity_of(pattern.m() as u64),
        ln_k: vnm_core::selection::ln_k(pattern.v() as u64, pattern.m() as u64)?,
        selection,
        padding,
        cp,
        mask_density: mask.density(),
        retained_score: retained,
        schedule,
        final_loss: run.final_loss(),
        artifacts: artifacts.clone(),
    };
    save(
        "report.json",
        serde_json::to_string_pretty(&report)?.as_bytes(),
        &mut artifacts,
    )?;
    let manifest_map = manifest::build(&out_dir, &artifacts)?;
    write_file(
        &out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest_map)?.as_bytes(),
    )?;
    println!(
        "wrote {} artifacts to {}",
        artifacts.len() + 1,
        out_dir.display()
    );
    Ok(())
}
