//! Single weight-update steps and mask refresh.

use crate::error::{Result, VnmError};
use crate::importance::{abs_scores, ria_scores, ActivationNorms};
use crate::mask::SparseMask;
use crate::matrix::DenseMatrix;
use crate::pattern::VnmPattern;
use crate::pruner::{apply_mask, prune_vnm};
use crate::train::lora::LoraLayer;
use serde::{Deserialize, Serialize};

/// Pruning criterion for mask computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Abs,
    Ria,
}

impl std::str::FromStr for Criterion {
    type Err = VnmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abs" => Ok(Criterion::Abs),
            "ria" => Ok(Criterion::Ria),
            other => Err(VnmError::InvalidConfig(format!(
                "criterion must be abs or ria, got {other:?}"
            ))),
        }
    }
}

/// Score a weight matrix under the criterion. RIA falls back to all-ones
/// activation norms when none are supplied.
pub fn score_weights(
    w: &DenseMatrix,
    criterion: Criterion,
    act: Option<&ActivationNorms>,
) -> Result<crate::importance::ImportanceMatrix> {
    match criterion {
        Criterion::Abs => Ok(abs_scores(w)),
        Criterion::Ria => {
            let fallback;
            let norms = match act {
                Some(a) => a,
                None => {
                    fallback = ActivationNorms::uniform(w.cols(), 0.5);
                    &fallback
                }
            };
            ria_scores(w, norms)
        }
    }
}

/// Fixed-mask update: W'_t = (W'_{t-1} - γ·∇L) re-masked so off-mask
/// entries stay exactly 0; the mask itself never changes.
pub fn fixed_mask_step(
    w_sparse: &DenseMatrix,
    grad: &DenseMatrix,
    mask: &SparseMask,
    gamma: f64,
) -> Result<DenseMatrix> {
    if w_sparse.shape() != grad.shape() {
        return Err(VnmError::ShapeMismatch {
            what: "fixed_mask_step operands",
            expected: w_sparse.shape(),
            actual: grad.shape(),
        });
    }
    let stepped = DenseMatrix::from_vec(
        w_sparse.rows(),
        w_sparse.cols(),
        w_sparse
            .values()
            .iter()
            .zip(grad.values().iter())
            .map(|(&w, &g)| ((w as f64) - gamma * (g as f64)) as f32)
            .collect(),
    )?;
    apply_mask(&stepped, mask)
}

/// SR-STE update: W_t = W_{t-1} - γ·(∇L(W'_{t-1}) + λ·(¬M)⊙W_{t-1}).
/// The gradient is taken at the masked weights (straight-through) and the
/// update lands on the dense weights; pruned entries decay toward zero.
pub fn srste_step(
    w_dense: &DenseMatrix,
    grad_at_masked: &DenseMatrix,
    mask: &SparseMask,
    gamma: f64,
    lambda: f64,
) -> Result<DenseMatrix> {
    if w_dense.shape() != grad_at_masked.shape() {
        return Err(VnmError::ShapeMismatch {
            what: "srste_step operands",
            expected: w_dense.shape(),
            actual: grad_at_masked.shape(),
        });
    }
    if w_dense.shape() != (mask.rows(), mask.cols()) {
        return Err(VnmError::ShapeMismatch {
            what: "srste_step mask",
            expected: w_dense.shape(),
            actual: (mask.rows(), mask.cols()),
        });
    }
    let values = w_dense
        .values()
        .iter()
        .zip(grad_at_masked.values().iter())
        .zip(mask.bits().iter())
        .map(|((&w, &g), &kept)| {
            let w = w as f64;
            let reg = if kept { 0.0 } else { lambda * w };
            (w - gamma * ((g as f64) + reg)) as f32
        })
        .collect();
    DenseMatrix::from_vec(w_dense.rows(), w_dense.cols(), values)
}

/// Recompute a mask from dense weights; returns the mask and its Hamming
/// distance to `prev` (0 when there is no previous mask).
pub fn update_mask(
    w: &DenseMatrix,
    criterion: Criterion,
    pattern: &VnmPattern,
    act: Option<&ActivationNorms>,
    prev: Option<&SparseMask>,
) -> Result<(SparseMask, usize)> {
    let scores = score_weights(w, criterion, act)?;
    let mask = prune_vnm(&scores, pattern)?;
    let changed = match prev {
        Some(p) => mask.hamming(p)?,
        None => 0,
    };
    Ok((mask, changed))
}

/// LoRA variant: merge the adapters into the base weight first.
pub fn update_mask_from_lora(
    layer: &LoraLayer,
    criterion: Criterion,
    pattern: &VnmPattern,
    act: Option<&ActivationNorms>,
    prev: Option<&SparseMask>,
) -> Result<(SparseMask, usize)> {
    update_mask(&layer.merged(), criterion, pattern, act, prev)
}
