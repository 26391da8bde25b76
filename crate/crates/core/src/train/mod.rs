//! Desk-scale training sandbox.
//!
//! Hand-derived gradients for a linear layer and a 2-layer tanh MLP, a
//! teacher-student MSE task with a known optimum, and three families of
//! sparse training: fixed-mask updates, SR-STE dynamic-mask updates on
//! dense weights, and staged LoRA with five mask schedules (strategies
//! A through E). Runs are bit-deterministic given a seed.

mod engine;
mod linalg;
pub mod lora;
pub mod report;
pub mod schedule;
pub mod steps;
pub mod task;

pub use lora::{effective_weight, LoraLayer};
pub use report::{grad_norm_report, GradNormReport};
pub use schedule::{three_stage_schedule, Stage, StageSpan};
pub use steps::{fixed_mask_step, srste_step, update_mask, update_mask_from_lora, Criterion};
pub use task::{ModelKind, ToyTask};

use crate::error::{Result, VnmError};
use crate::mask::SparseMask;
use crate::matrix::DenseMatrix;
use crate::pattern::VnmPattern;
use serde::{Deserialize, Serialize};

/// LoRA mask schedules explored in the ablation:
/// A) fixed masks from one-shot pruning for the whole run;
/// B) dense warmup, then fixed masks;
/// C) dynamic masks at equal intervals for the entire run;
/// D) dynamic masks in an early window only, then fixed, no warmup;
/// E) the full three-stage schedule (dense, dynamic, fixed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    A,
    B,
    C,
    D,
    E,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::A,
        Strategy::B,
        Strategy::C,
        Strategy::D,
        Strategy::E,
    ];
}

impl std::str::FromStr for Strategy {
    type Err = VnmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Strategy::A),
            "B" => Ok(Strategy::B),
            "C" => Ok(Strategy::C),
            "D" => Ok(Strategy::D),
            "E" => Ok(Strategy::E),
            other => Err(VnmError::InvalidConfig(format!(
                "strategy must be one of A..E, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Training family: staged LoRA, full-parameter fixed-mask, or
/// full-parameter SR-STE with periodic mask updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    Lora(Strategy),
    FullFixed,
    FullSrste,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub pattern: VnmPattern,
    pub mode: TrainMode,
    pub criterion: Criterion,
    /// γ
    pub learning_rate: f64,
    /// λ; only the SR-STE path reads it.
    pub srste_lambda: f64,
    pub total_iters: usize,
    /// Interval between mask recomputes in dynamic phases. LoRA counts
    /// plain iterations; full-parameter SR-STE counts epochs (one epoch =
    /// ceil(sample_count / batch_size) iterations).
    pub mask_update_interval: usize,
    /// Minibatch size per iteration, clamped to the dataset size.
    pub batch_size: usize,
    /// Dense/dynamic/fixed split for strategies B (first entry) and E.
    pub stage_fractions: (f64, f64, f64),
    /// Strategy D's dynamic window as a fraction of the run.
    pub early_window_fraction: f64,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn lora(pattern: VnmPattern, strategy: Strategy, seed: u64) -> Self {
        Self {
            pattern,
            mode: TrainMode::Lora(strategy),
            criterion: Criterion::Ria,
            learning_rate: 2e-2,
            srste_lambda: 2e-4,
            total_iters: 2000,
            mask_update_interval: 20,
            stage_fractions: (0.025, 0.025, 0.95),
            early_window_fraction: 0.05,
            lora_rank: 16,
            lora_alpha: 32.0,
            batch_size: 32,
            seed,
        }
    }

    pub fn full_fixed(pattern: VnmPattern, seed: u64) -> Self {
        Self {
            mode: TrainMode::FullFixed,
            criterion: Criterion::Ria,
            ..Self::lora(pattern, Strategy::A, seed)
        }
    }

    pub fn full_srste(pattern: VnmPattern, seed: u64) -> Self {
        Self {
            mode: TrainMode::FullSrste,
            criterion: Criterion::Abs,
            mask_update_interval: 5,
            ..Self::lora(pattern, Strategy::A, seed)
        }
    }

    /// α / r.
    pub fn lora_scale(&self) -> f64 {
        self.lora_alpha / self.lora_rank as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(VnmError::InvalidConfig(format!(
                "learning rate must be a positive real, got {}",
                self.learning_rate
            )));
        }
        if self.srste_lambda < 0.0 || !self.srste_lambda.is_finite() {
            return Err(VnmError::InvalidConfig(format!(
                "srste lambda must be nonnegative, got {}",
                self.srste_lambda
            )));
        }
        if self.mask_update_interval == 0 {
            return Err(VnmError::InvalidConfig(
                "mask update interval must be >= 1".into(),
            ));
        }
        if self.lora_rank == 0 {
            return Err(VnmError::InvalidConfig("LoRA rank must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(VnmError::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration logs of one run (minibatch loss, gradient norm, mask churn
/// and stage label), the full-dataset loss at the end, and the final
/// effective weight and mask.
#[derive(Debug, Clone, Serialize)]
pub struct TrainRun {
    pub loss: Vec<f32>,
    pub grad_norm: Vec<f32>,
    pub mask_changed: Vec<u32>,
    pub stage: Vec<Stage>,
    pub final_eval_loss: f32,
    #[serde(skip)]
    pub final_mask: Option<SparseMask>,
    #[serde(skip)]
    pub final_weights: DenseMatrix,
}

impl TrainRun {
    /// Full-dataset MSE of the final weights.
    pub fn final_loss(&self) -> f32 {
        self.final_eval_loss
    }

    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }
}

/// Run one training session. Deterministic: identical task, config and
/// seed replay the same logs bit for bit.
pub fn train(task: &ToyTask, config: &TrainConfig) -> Result<TrainRun> {
    engine::run(task, config)
}

/// Verify hand-derived gradients against central finite differences at a
/// generic point: returns the worst relative L2 error across parameter
/// groups. LoRA checks every adapter entry; the full-parameter modes check
/// the retained entries of the sparse weight (plus the MLP auxiliaries).
pub fn finite_difference_check(task: &ToyTask, config: &TrainConfig) -> Result<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    config.validate()?;
    let mut eng = engine::Engine::new(task, config)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_f00d);
    let mut jitter = |mat: &mut linalg::Mat, scale: f64| {
        for x in mat.data.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += scale * z;
        }
    };
    // move to a generic point so no gradient is trivially zero
    jitter(&mut eng.lora_b, 0.3);
    jitter(&mut eng.lora_a, 0.3);
    jitter(&mut eng.w_dense, 0.1);
    eng.refresh_mask()?;
    if matches!(config.mode, TrainMode::FullFixed) {
        let bits: Vec<bool> = eng.mask.as_ref().expect("just set").bits().to_vec();
        eng.w_dense.mask_in_place(&bits);
    }

    let w_eff = eng.effective();
    let (_, grads) = eng.forward_backward(&w_eff, &task.inputs, &task.targets);

    let rel = |analytic: &[f64], numeric: &[f64]| {
        let diff: f64 = analytic
            .iter()
            .zip(numeric.iter())
            .map(|(a, n)| (a - n) * (a - n))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        diff / norm.max(1e-12)
    };
    let mut worst = 0.0f64;

    match config.mode {
        TrainMode::Lora(_) => {
            let (g_b, g_a) = eng.lora_grads(&grads.g1);
            for which in 0..2 {
                let len = if which == 0 {
                    eng.lora_b.data.len()
                } else {
                    eng.lora_a.data.len()
                };
                let mut numeric = Vec::with_capacity(len);
                for idx in 0..len {
                    let read = |e: &mut engine::Engine| {
                        let w = e.effective();
                        e.forward_loss(&w)
                    };
                    let theta = if which == 0 {
                        eng.lora_b.data[idx]
                    } else {
                        eng.lora_a.data[idx]
                    };
                    let h = 1e-6 * theta.abs().max(1.0);
                    let set = |e: &mut engine::Engine, v: f64| {
                        if which == 0 {
                            e.lora_b.data[idx] = v;
                        } else {
                            e.lora_a.data[idx] = v;
                        }
                    };
                    set(&mut eng, theta + h);
                    let up = read(&mut eng);
                    set(&mut eng, theta - h);
                    let down = read(&mut eng);
                    set(&mut eng, theta);
                    numeric.push((up - down) / (2.0 * h));
                }
                let analytic = if which == 0 { &g_b.data } else { &g_a.data };
                worst = worst.max(rel(analytic, &numeric));
            }
        }
        TrainMode::FullFixed | TrainMode::FullSrste => {
            let bits: Vec<bool> = eng.mask.as_ref().expect("mask set").bits().to_vec();
            let retained: Vec<usize> = bits
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| i)
                .collect();
            let mut numeric = Vec::with_capacity(retained.len());
            for &idx in &retained {
                let theta = eng.w_dense.data[idx];
                let h = 1e-6 * theta.abs().max(1.0);
                eng.w_dense.data[idx] = theta + h;
                let up = {
                    let w = eng.effective();
                    eng.forward_loss(&w)
                };
                eng.w_dense.data[idx] = theta - h;
                let down = {
                    let w = eng.effective();
                    eng.forward_loss(&w)
                };
                eng.w_dense.data[idx] = theta;
                numeric.push((up - down) / (2.0 * h));
            }
            let analytic: Vec<f64> = retained.iter().map(|&i| grads.g1.data[i]).collect();
            worst = worst.max(rel(&analytic, &numeric));

            if task.kind() == ModelKind::Mlp {
                // second affine and both biases, full coordinates
                let mut numeric = Vec::new();
                for idx in 0..eng.w2.data.len() {
                    let theta = eng.w2.data[idx];
                    let h = 1e-6 * theta.abs().max(1.0);
                    eng.w2.data[idx] = theta + h;
                    let up = {
                        let w = eng.effective();
                        eng.forward_loss(&w)
                    };
                    eng.w2.data[idx] = theta - h;
                    let down = {
                        let w = eng.effective();
                        eng.forward_loss(&w)
                    };
                    eng.w2.data[idx] = theta;
                    numeric.push((up - down) / (2.0 * h));
                }
                worst = worst.max(rel(&grads.g_w2.data, &numeric));

                for which in 0..2 {
                    let len = if which == 0 {
                        eng.b1.len()
                    } else {
                        eng.b2.len()
                    };
                    let mut numeric = Vec::with_capacity(len);
                    for idx in 0..len {
                        let theta = if which == 0 { eng.b1[idx] } else { eng.b2[idx] };
                        let h = 1e-6 * theta.abs().max(1.0);
                        let set = |e: &mut engine::Engine, v: f64| {
                            if which == 0 {
                                e.b1[idx] = v;
                            } else {
                                e.b2[idx] = v;
                            }
                        };
                        set(&mut eng, theta + h);
                        let up = {
                            let w = eng.effective();
                            eng.forward_loss(&w)
                        };
                        set(&mut eng, theta - h);
                        let down = {
                            let w = eng.effective();
                            eng.forward_loss(&w)
                        };
                        set(&mut eng, theta);
                        numeric.push((up - down) / (2.0 * h));
                    }
                    let analytic = if which == 0 { &grads.g_b1 } else { &grads.g_b2 };
                    worst = worst.max(rel(analytic, &numeric));
                }
            }
        }
    }
    Ok(worst)
}
