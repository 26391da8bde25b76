//! The deterministic training loop behind `train`.
//!
//! Minibatch SGD over the fixed task dataset, with batches drawn from the
//! seeded ChaCha stream so identical configs replay bit-identically. Loss
//! and gradient norms are logged per iteration before the update;
//! mask-changed counts log the Hamming distance to the previous sparse
//! mask whenever a recompute happens. The run ends with one full-dataset
//! evaluation of the final weights.

use crate::error::{Result, VnmError};
use crate::mask::SparseMask;
use crate::train::linalg::Mat;
use crate::train::schedule::{Stage, StageSpan};
use crate::train::steps::{update_mask, Criterion};
use crate::train::task::{ModelKind, ToyTask};
use crate::train::{Strategy, TrainConfig, TrainMode, TrainRun};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Trainable state. LoRA keeps the base frozen and trains (B, A); the full
/// modes train the sparsified weight directly. MLP auxiliaries (second
/// affine and biases) train in full modes and stay frozen under LoRA.
pub(crate) struct Engine<'t> {
    task: &'t ToyTask,
    config: &'t TrainConfig,
    pub w_base: Mat,
    pub lora_b: Mat,
    pub lora_a: Mat,
    pub w_dense: Mat,
    pub w2: Mat,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub mask: Option<SparseMask>,
}

pub(crate) struct Gradients {
    /// Gradient at the effective (masked) sparse weight.
    pub g1: Mat,
    pub g_w2: Mat,
    pub g_b1: Vec<f64>,
    pub g_b2: Vec<f64>,
}

impl<'t> Engine<'t> {
    pub fn new(task: &'t ToyTask, config: &'t TrainConfig) -> Result<Self> {
        let (rows1, cols1) = task.sparse_weight_shape();
        let pattern = config.pattern;
        if rows1 % pattern.v() != 0 || cols1 % pattern.m() != 0 {
            return Err(VnmError::NotDivisible {
                rows: rows1,
                cols: cols1,
                v: pattern.v(),
                m: pattern.m(),
            });
        }
        if config.lora_rank == 0 {
            return Err(VnmError::InvalidConfig("LoRA rank must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let r = config.lora_rank;
        // LoRA convention: B starts at zero, A at small Gaussian, so the
        // adapter contributes nothing until training moves it.
        let lora_b = Mat::zeros(rows1, r);
        let init_std = 1.0 / (cols1 as f64).sqrt();
        let lora_a = Mat {
            rows: r,
            cols: cols1,
            data: (0..r * cols1)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    x * init_std
                })
                .collect(),
        };
        Ok(Self {
            task,
            config,
            w_base: task.student_w1.clone(),
            lora_b,
            lora_a,
            w_dense: task.student_w1.clone(),
            w2: task.teacher.w2.clone(),
            b1: task.teacher.b1.clone(),
            b2: task.teacher.b2.clone(),
            mask: None,
        })
    }

    pub fn is_lora(&self) -> bool {
        matches!(self.config.mode, TrainMode::Lora(_))
    }

    /// Base-plus-adapter merge, unmasked (the matrix masks are computed on).
    pub fn merged(&self) -> Mat {
        if self.is_lora() {
            let delta = self
                .lora_b
                .matmul(&self.lora_a)
                .scale(self.config.lora_scale());
            self.w_base.add(&delta)
        } else {
            self.w_dense.clone()
        }
    }

    /// Effective sparsified weight: merge, then mask if one is active.
    pub fn effective(&self) -> Mat {
        let merged = self.merged();
        match &self.mask {
            Some(mask) => merged.masked(mask.bits()),
            None => merged,
        }
    }

    /// Full-dataset loss (for finite-difference probes and final eval).
    pub fn forward_loss(&self, w_eff: &Mat) -> f64 {
        let x = &self.task.inputs;
        let targets = &self.task.targets;
        let batch = x.cols as f64;
        let y = match self.task.kind() {
            ModelKind::Linear => w_eff.matmul(x),
            ModelKind::Mlp => {
                let h = w_eff.matmul(x).add_col_broadcast(&self.b1).map(f64::tanh);
                self.w2.matmul(&h).add_col_broadcast(&self.b2)
            }
        };
        let e = y.sub(targets);
        e.frob_norm().powi(2) / (batch * e.rows as f64)
    }

    /// Forward pass and loss plus gradients for every parameter group, on
    /// the given inputs/targets (a minibatch or the full dataset).
    pub fn forward_backward(&self, w_eff: &Mat, x: &Mat, targets: &Mat) -> (f64, Gradients) {
        let batch = x.cols as f64;
        match self.task.kind() {
            ModelKind::Linear => {
                let y = w_eff.matmul(x);
                let e = y.sub(targets);
                let scale = 2.0 / (batch * e.rows as f64);
                let loss = e.frob_norm().powi(2) / (batch * e.rows as f64);
                let g1 = e.matmul_bt(x).scale(scale);
                (
                    loss,
                    Gradients {
                        g1,
                        g_w2: Mat::zeros(1, 1),
                        g_b1: Vec::new(),
                        g_b2: Vec::new(),
                    },
                )
            }
            ModelKind::Mlp => {
                let z1 = w_eff.matmul(x).add_col_broadcast(&self.b1);
                let h = z1.map(f64::tanh);
                let y = self.w2.matmul(&h).add_col_broadcast(&self.b2);
                let e = y.sub(targets);
                let scale = 2.0 / (batch * e.rows as f64);
                let loss = e.frob_norm().powi(2) / (batch * e.rows as f64);
                let dy = e.scale(scale);
                let g_w2 = dy.matmul_bt(&h);
                let g_b2 = dy.row_sums();
                let dh = self.w2.at_matmul(&dy);
                let dz = dh.hadamard(&h.map(|t| 1.0 - t * t));
                let g1 = dz.matmul_bt(x);
                let g_b1 = dz.row_sums();
                (
                    loss,
                    Gradients {
                        g1,
                        g_w2,
                        g_b1,
                        g_b2,
                    },
                )
            }
        }
    }

    fn mask_bits(&self) -> Option<&[bool]> {
        self.mask.as_ref().map(|m| m.bits())
    }

    /// Adapter gradients through the mask: s·(G1 ⊙ M)·Aᵀ and s·Bᵀ·(G1 ⊙ M).
    pub fn lora_grads(&self, g1: &Mat) -> (Mat, Mat) {
        let gm = match self.mask_bits() {
            Some(bits) => g1.masked(bits),
            None => g1.clone(),
        };
        let s = self.config.lora_scale();
        let g_b = gm.matmul_bt(&self.lora_a).scale(s);
        let g_a = self.lora_b.at_matmul(&gm).scale(s);
        (g_b, g_a)
    }

    /// Recompute the mask from the merged weights; returns the Hamming
    /// distance to the previous sparse mask (0 if none existed).
    pub fn refresh_mask(&mut self) -> Result<usize> {
        let merged = self.merged().to_dense();
        let act = match self.config.criterion {
            Criterion::Ria => Some(self.task.activation_norms()),
            Criterion::Abs => None,
        };
        let (mask, changed) = update_mask(
            &merged,
            self.config.criterion,
            &self.config.pattern,
            act,
            self.mask.as_ref(),
        )?;
        self.mask = Some(mask);
        Ok(changed)
    }
}

/// Phase plan for each mode/strategy.
pub(crate) fn phase_plan(config: &TrainConfig) -> Result<Vec<StageSpan>> {
    let total = config.total_iters;
    let span = |stage, start, end| StageSpan { stage, start, end };
    let plan = match config.mode {
        TrainMode::Lora(Strategy::A) => vec![span(Stage::Fixed, 0, total)],
        TrainMode::Lora(Strategy::B) => {
            crate::train::schedule::check_fractions(config.stage_fractions)?;
            let warmup = crate::train::schedule::stage_len(config.stage_fractions.0, total);
            vec![
                span(Stage::Dense, 0, warmup),
                span(Stage::Fixed, warmup, total),
            ]
        }
        TrainMode::Lora(Strategy::C) => vec![span(Stage::Dynamic, 0, total)],
        TrainMode::Lora(Strategy::D) => {
            if !(0.0..=1.0).contains(&config.early_window_fraction) {
                return Err(VnmError::InvalidConfig(
                    "early window fraction must lie in [0, 1]".into(),
                ));
            }
            let window = crate::train::schedule::stage_len(config.early_window_fraction, total);
            vec![
                span(Stage::Dynamic, 0, window),
                span(Stage::Fixed, window, total),
            ]
        }
        TrainMode::Lora(Strategy::E) => {
            crate::train::schedule::three_stage_schedule(total, config.stage_fractions)?
        }
        TrainMode::FullFixed => vec![span(Stage::Fixed, 0, total)],
        TrainMode::FullSrste => vec![span(Stage::Dynamic, 0, total)],
    };
    Ok(plan)
}

pub(crate) fn run(task: &ToyTask, config: &TrainConfig) -> Result<TrainRun> {
    config.validate()?;
    let mut engine = Engine::new(task, config)?;
    let plan = phase_plan(config)?;
    let total = config.total_iters;
    let mut loss_log = Vec::with_capacity(total);
    let mut grad_log = Vec::with_capacity(total);
    let mut changed_log = Vec::with_capacity(total);
    let mut stage_log = Vec::with_capacity(total);
    let gamma = config.learning_rate;
    let samples = task.sample_count();
    let batch = config.batch_size.min(samples);
    // LoRA intervals count iterations; full-parameter SR-STE counts epochs.
    let iters_per_epoch = samples.div_ceil(batch);
    let interval = match config.mode {
        TrainMode::FullSrste => config.mask_update_interval.max(1) * iters_per_epoch,
        _ => config.mask_update_interval.max(1),
    };

    // Batch sampling continues the same seeded stream used for init, so the
    // whole run is a pure function of (task, config).
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e3779b97f4a7c15));
    let mut index_pool: Vec<usize> = (0..samples).collect();
    let mut draw_batch = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        use rand::Rng;
        for k in 0..batch {
            let pick = rng.random_range(k..samples);
            index_pool.swap(k, pick);
        }
        index_pool[..batch].to_vec()
    };

    for phase in &plan {
        // Phase entry: establish the mask state even for empty spans, so a
        // zero-iteration run still ends with its one-shot mask.
        match phase.stage {
            Stage::Dense => engine.mask = None,
            Stage::Dynamic => {}
            Stage::Fixed => {
                if engine.mask.is_none() {
                    engine.refresh_mask()?;
                    if matches!(config.mode, TrainMode::FullFixed) {
                        let bits: Vec<bool> =
                            engine.mask.as_ref().expect("just set").bits().to_vec();
                        engine.w_dense.mask_in_place(&bits);
                    }
                }
            }
        }
        for t in phase.start..phase.end {
            let mut changed = 0usize;
            if phase.stage == Stage::Dynamic && (t - phase.start) % interval == 0 {
                changed = engine.refresh_mask()?;
            }
            let idx = draw_batch(&mut rng);
            let x_batch = task.inputs.gather_cols(&idx);
            let t_batch = task.targets.gather_cols(&idx);
            let w_eff = engine.effective();
            let (loss, grads) = engine.forward_backward(&w_eff, &x_batch, &t_batch);

            let grad_norm = match config.mode {
                TrainMode::Lora(_) => {
                    let (g_b, g_a) = engine.lora_grads(&grads.g1);
                    let norm = (g_b.frob_norm().powi(2) + g_a.frob_norm().powi(2)).sqrt();
                    engine.lora_b.sgd_step(&g_b, gamma);
                    engine.lora_a.sgd_step(&g_a, gamma);
                    norm
                }
                TrainMode::FullFixed => {
                    let bits = engine.mask.as_ref().expect("fixed run has a mask").bits();
                    let gm = grads.g1.masked(bits);
                    let norm = gm.frob_norm();
                    engine.w_dense.sgd_step(&grads.g1, gamma);
                    engine.w_dense.mask_in_place(bits);
                    if task.kind() == ModelKind::Mlp {
                        engine.w2.sgd_step(&grads.g_w2, gamma);
                        for (b, g) in engine.b1.iter_mut().zip(grads.g_b1.iter()) {
                            *b -= gamma * g;
                        }
                        for (b, g) in engine.b2.iter_mut().zip(grads.g_b2.iter()) {
                            *b -= gamma * g;
                        }
                    }
                    norm
                }
                TrainMode::FullSrste => {
                    let mask = engine.mask.as_ref().expect("srste run has a mask");
                    let norm = grads.g1.frob_norm();
                    let lambda = config.srste_lambda;
                    let bits = mask.bits();
                    for (idx, w) in engine.w_dense.data.iter_mut().enumerate() {
                        let reg = if bits[idx] { 0.0 } else { lambda * *w };
                        *w -= gamma * (grads.g1.data[idx] + reg);
                    }
                    if task.kind() == ModelKind::Mlp {
                        engine.w2.sgd_step(&grads.g_w2, gamma);
                        for (b, g) in engine.b1.iter_mut().zip(grads.g_b1.iter()) {
                            *b -= gamma * g;
                        }
                        for (b, g) in engine.b2.iter_mut().zip(grads.g_b2.iter()) {
                            *b -= gamma * g;
                        }
                    }
                    norm
                }
            };

            loss_log.push(loss as f32);
            grad_log.push(grad_norm as f32);
            changed_log.push(changed as u32);
            stage_log.push(phase.stage);
        }
    }

    let final_eff = engine.effective();
    let final_eval_loss = engine.forward_loss(&final_eff) as f32;
    Ok(TrainRun {
        loss: loss_log,
        grad_norm: grad_log,
        mask_changed: changed_log,
        stage: stage_log,
        final_eval_loss,
        final_mask: engine.mask,
        final_weights: final_eff.to_dense(),
    })
}
