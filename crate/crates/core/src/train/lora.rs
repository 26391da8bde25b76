//! Low-rank adapter layer: W' = (W + (α/r)·B·A) ⊙ M.

use crate::error::{Result, VnmError};
use crate::mask::SparseMask;
use crate::matrix::DenseMatrix;
use crate::train::linalg::Mat;

/// A frozen base weight with trainable low-rank matrices. `mask: None`
/// means all-true (dense LoRA).
#[derive(Debug, Clone)]
pub struct LoraLayer {
    pub w: DenseMatrix,
    pub b: DenseMatrix,
    pub a: DenseMatrix,
    pub rank: usize,
    pub alpha: f64,
    pub mask: Option<SparseMask>,
}

impl LoraLayer {
    pub fn new(
        w: DenseMatrix,
        b: DenseMatrix,
        a: DenseMatrix,
        rank: usize,
        alpha: f64,
        mask: Option<SparseMask>,
    ) -> Result<Self> {
        if b.shape() != (w.rows(), rank) {
            return Err(VnmError::ShapeMismatch {
                what: "lora B",
                expected: (w.rows(), rank),
                actual: b.shape(),
            });
        }
        if a.shape() != (rank, w.cols()) {
            return Err(VnmError::ShapeMismatch {
                what: "lora A",
                expected: (rank, w.cols()),
                actual: a.shape(),
            });
        }
        if let Some(m) = &mask {
            if (m.rows(), m.cols()) != w.shape() {
                return Err(VnmError::ShapeMismatch {
                    what: "lora mask",
                    expected: w.shape(),
                    actual: (m.rows(), m.cols()),
                });
            }
        }
        Ok(Self {
            w,
            b,
            a,
            rank,
            alpha,
            mask,
        })
    }

    /// α / r.
    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    /// W + (α/r)·B·A, unmasked.
    pub fn merged(&self) -> DenseMatrix {
        let w = Mat::from_dense(&self.w);
        let delta = Mat::from_dense(&self.b)
            .matmul(&Mat::from_dense(&self.a))
            .scale(self.scale());
        w.add(&delta).to_dense()
    }
}

/// W' = (W + (α/r)·B·A) ⊙ M.
pub fn effective_weight(layer: &LoraLayer) -> Result<DenseMatrix> {
    let merged = layer.merged();
    match &layer.mask {
        Some(mask) => crate::pruner::apply_mask(&merged, mask),
        None => Ok(merged),
    }
}
