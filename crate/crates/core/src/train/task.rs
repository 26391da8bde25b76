//! Teacher-student task on synthetic data.
//!
//! A frozen random teacher defines the target function; the student starts
//! from the teacher's weights perturbed by a "pretraining gap" on the layer
//! being sparsified, and the loss is the MSE between student and teacher
//! outputs on a fixed Gaussian dataset. The optimum is known (close the
//! gap, modulo the mask), so accuracy restoration is measurable without
//! external data. Teacher columns carry a deterministic spread of scales
//! so channel importance is non-uniform and mask choice matters.

use crate::error::{Result, VnmError};
use crate::importance::ActivationNorms;
use crate::matrix::DenseMatrix;
use crate::pattern::VnmPattern;
use crate::train::linalg::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Student/teacher architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Single linear layer, no bias; the whole weight is sparsified.
    Linear,
    /// affine -> tanh -> affine; the first weight is sparsified.
    Mlp,
}

/// Frozen teacher parameters. For the linear kind only `w1` is used.
#[derive(Debug, Clone)]
pub(crate) struct TeacherParams {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ToyTask {
    kind: ModelKind,
    pattern: VnmPattern,
    seed: u64,
    sample_count: usize,
    pub(crate) teacher: TeacherParams,
    /// Student's frozen starting point for the sparsified weight: the
    /// teacher's w1 plus the pretraining gap.
    pub(crate) student_w1: Mat,
    /// in_dim x sample_count inputs (rows are input channels).
    pub(crate) inputs: Mat,
    /// Cached teacher outputs, out_dim x sample_count.
    pub(crate) targets: Mat,
    pub(crate) act_norms: ActivationNorms,
}

/// Default ratio of the pretraining gap to the teacher scale on the
/// sparsified weight. Chosen so one-shot masks computed on the student's
/// starting point are measurably worse than masks computed after adapters
/// close part of the gap.
pub const DEFAULT_PRETRAIN_GAP: f64 = 1.5;
const HIDDEN_DIM: usize = 24;

fn gaussian_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat {
        rows,
        cols,
        data: (0..rows * cols)
            .map(|_| StandardNormal.sample(rng))
            .collect(),
    }
}

/// Deterministic per-column scale spread, shuffled so each block mixes
/// important and unimportant channels.
fn column_scales(rng: &mut ChaCha8Rng, cols: usize) -> Vec<f64> {
    let mut scales: Vec<f64> = (0..cols)
        .map(|j| {
            let t = j as f64 / (cols.max(2) - 1) as f64;
            0.25 * (8.0f64).powf(t) // log-spaced 0.25 .. 2.0
        })
        .collect();
    for i in (1..scales.len()).rev() {
        let j = rng.random_range(0..=i);
        scales.swap(i, j);
    }
    scales
}

impl ToyTask {
    /// Default desk-scale task sized to the pattern: base dims 32x60
    /// (hidden 24 for the MLP), rounded up to pattern multiples.
    pub fn new(
        kind: ModelKind,
        pattern: VnmPattern,
        seed: u64,
        sample_count: usize,
    ) -> Result<Self> {
        let out_base = 32usize;
        let in_base = 60usize;
        let round = |n: usize, mult: usize| n.div_ceil(mult) * mult;
        let in_dim = round(in_base, pattern.m());
        let (rows1, cols1, out_dim) = match kind {
            ModelKind::Linear => (
                round(out_base, pattern.v()),
                in_dim,
                round(out_base, pattern.v()),
            ),
            ModelKind::Mlp => (round(HIDDEN_DIM, pattern.v()), in_dim, out_base),
        };
        Self::with_dims(
            kind,
            pattern,
            seed,
            sample_count,
            rows1,
            cols1,
            out_dim,
            DEFAULT_PRETRAIN_GAP,
        )
    }

    /// Explicit dims for tests: `rows1 x cols1` is the sparsified weight,
    /// `pretrain_gap` the relative perturbation the student starts from.
    #[allow(clippy::too_many_arguments)]
    pub fn with_dims(
        kind: ModelKind,
        pattern: VnmPattern,
        seed: u64,
        sample_count: usize,
        rows1: usize,
        cols1: usize,
        out_dim: usize,
        pretrain_gap: f64,
    ) -> Result<Self> {
        if sample_count == 0 {
            return Err(VnmError::InvalidConfig(
                "sample count must be positive".into(),
            ));
        }
        if !rows1.is_multiple_of(pattern.v()) || !cols1.is_multiple_of(pattern.m()) {
            return Err(VnmError::NotDivisible {
                rows: rows1,
                cols: cols1,
                v: pattern.v(),
                m: pattern.m(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales = column_scales(&mut rng, cols1);
        let mut w1 = gaussian_mat(&mut rng, rows1, cols1);
        for row in w1.data.chunks_exact_mut(cols1) {
            for (x, scale) in row.iter_mut().zip(scales.iter()) {
                *x *= scale;
            }
        }
        let (b1, w2, b2) = match kind {
            ModelKind::Linear => (vec![0.0; rows1], Mat::zeros(1, 1), Vec::new()),
            ModelKind::Mlp => {
                let b1: Vec<f64> = (0..rows1)
                    .map(|_| {
                        let x: f64 = StandardNormal.sample(&mut rng);
                        0.1 * x
                    })
                    .collect();
                let w2 = gaussian_mat(&mut rng, out_dim, rows1).scale(1.0 / (rows1 as f64).sqrt());
                let b2: Vec<f64> = (0..out_dim)
                    .map(|_| {
                        let x: f64 = StandardNormal.sample(&mut rng);
                        0.1 * x
                    })
                    .collect();
                (b1, w2, b2)
            }
        };
        let gap = gaussian_mat(&mut rng, rows1, cols1);
        let mut student_w1 = w1.clone();
        for (s, g) in student_w1.data.iter_mut().zip(gap.data.iter()) {
            *s += pretrain_gap * g;
        }
        let inputs = gaussian_mat(&mut rng, cols1, sample_count);
        let teacher = TeacherParams { w1, b1, w2, b2 };
        let targets = teacher_forward(kind, &teacher, &inputs);
        let act_norms = ActivationNorms::from_inputs(&inputs.to_dense(), 0.5)?;
        Ok(Self {
            kind,
            pattern,
            seed,
            sample_count,
            teacher,
            student_w1,
            inputs,
            targets,
            act_norms,
        })
    }

    /// Wrap an explicit dense matrix as the (linear) teacher. The student
    /// starts at the teacher plus `pretrain_gap` noise; a gap of 0 makes
    /// masking damage the only thing training has to recover.
    pub fn from_teacher(
        teacher_w: &DenseMatrix,
        pattern: VnmPattern,
        seed: u64,
        sample_count: usize,
        pretrain_gap: f64,
    ) -> Result<Self> {
        if sample_count == 0 {
            return Err(VnmError::InvalidConfig(
                "sample count must be positive".into(),
            ));
        }
        let (rows1, cols1) = teacher_w.shape();
        if !rows1.is_multiple_of(pattern.v()) || !cols1.is_multiple_of(pattern.m()) {
            return Err(VnmError::NotDivisible {
                rows: rows1,
                cols: cols1,
                v: pattern.v(),
                m: pattern.m(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = Mat::from_dense(teacher_w);
        let gap = gaussian_mat(&mut rng, rows1, cols1);
        let mut student_w1 = w1.clone();
        for (s, g) in student_w1.data.iter_mut().zip(gap.data.iter()) {
            *s += pretrain_gap * g;
        }
        let inputs = gaussian_mat(&mut rng, cols1, sample_count);
        let teacher = TeacherParams {
            w1,
            b1: vec![0.0; rows1],
            w2: Mat::zeros(1, 1),
            b2: Vec::new(),
        };
        let targets = teacher_forward(ModelKind::Linear, &teacher, &inputs);
        let act_norms = ActivationNorms::from_inputs(&inputs.to_dense(), 0.5)?;
        Ok(Self {
            kind: ModelKind::Linear,
            pattern,
            seed,
            sample_count,
            teacher,
            student_w1,
            inputs,
            targets,
            act_norms,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn pattern(&self) -> VnmPattern {
        self.pattern
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Shape of the sparsified weight.
    pub fn sparse_weight_shape(&self) -> (usize, usize) {
        (self.student_w1.rows, self.student_w1.cols)
    }

    /// The teacher's (frozen) sparsified-layer weight, f32 view.
    pub fn teacher_weight(&self) -> DenseMatrix {
        self.teacher.w1.to_dense()
    }

    /// The student's frozen starting weight, f32 view.
    pub fn student_weight(&self) -> DenseMatrix {
        self.student_w1.to_dense()
    }

    /// Activation norms of the fixed dataset (for RIA-based mask updates).
    pub fn activation_norms(&self) -> &ActivationNorms {
        &self.act_norms
    }
}

pub(crate) fn teacher_forward(kind: ModelKind, p: &TeacherParams, x: &Mat) -> Mat {
    match kind {
        ModelKind::Linear => p.w1.matmul(x),
        ModelKind::Mlp => {
            let h = p.w1.matmul(x).add_col_broadcast(&p.b1).map(f64::tanh);
            p.w2.matmul(&h).add_col_broadcast(&p.b2)
        }
    }
}
