//! Importance scores: ABS and RIA.
//!
//! ABS is the plain magnitude |w|. RIA scores a weight by its share of its
//! row and column absolute mass, optionally scaled by an activation-norm
//! factor per input channel:
//!
//! ```text
//! ria[i][j] = (|w[i][j]| / sum_r |w[r][j]| + |w[i][j]| / sum_c |w[i][c]|) * norms[j]^a
//! ```
//!
//! A row or column whose absolute sum is exactly zero contributes a zero
//! fraction rather than NaN. Norms attach to input channels (columns of W);
//! with all-ones norms or a = 0 the activation factor is identically 1.

use crate::error::{Result, VnmError};
use crate::matrix::DenseMatrix;

/// Nonnegative per-weight saliency, row-major, same shape as the host matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f32>,
}

impl ImportanceMatrix {
    pub fn from_vec(rows: usize, cols: usize, scores: Vec<f32>) -> Result<Self> {
        if scores.len() != rows * cols {
            return Err(VnmError::LengthMismatch {
                what: "importance scores",
                expected: rows * cols,
                actual: scores.len(),
            });
        }
        for (idx, s) in scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(VnmError::NonFinite {
                    what: "importance scores",
                    index: idx,
                });
            }
            if *s < 0.0 {
                return Err(VnmError::Negative {
                    what: "importance scores",
                    index: idx,
                });
            }
        }
        Ok(Self { rows, cols, scores })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.scores[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.scores[i * self.cols..(i + 1) * self.cols]
    }
}

/// L2 norms of activations, one per input channel, plus the exponent `a`
/// controlling their impact.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationNorms {
    norms: Vec<f32>,
    exponent_a: f32,
}

impl ActivationNorms {
    pub fn new(norms: Vec<f32>, exponent_a: f32) -> Result<Self> {
        for (idx, n) in norms.iter().enumerate() {
            if !n.is_finite() {
                return Err(VnmError::NonFinite {
                    what: "activation norms",
                    index: idx,
                });
            }
            if *n < 0.0 {
                return Err(VnmError::Negative {
                    what: "activation norms",
                    index: idx,
                });
            }
        }
        if !(0.0..=1.0).contains(&exponent_a) {
            return Err(VnmError::InvalidConfig(format!(
                "activation exponent a must lie in [0, 1], got {exponent_a}"
            )));
        }
        Ok(Self { norms, exponent_a })
    }

    /// All-ones norms: the activation factor becomes identically 1.
    pub fn uniform(cols: usize, exponent_a: f32) -> Self {
        Self {
            norms: vec![1.0; cols],
            exponent_a,
        }
    }

    /// Column L2 norms of a dataset whose rows are input channels.
    pub fn from_inputs(inputs: &DenseMatrix, exponent_a: f32) -> Result<Self> {
        let mut norms = vec![0.0f64; inputs.rows()];
        for (ch, norm) in norms.iter_mut().enumerate() {
            *norm = inputs
                .row(ch)
                .iter()
                .map(|&x| (x as f64) * (x as f64))
                .sum::<f64>()
                .sqrt();
        }
        Self::new(norms.into_iter().map(|n| n as f32).collect(), exponent_a)
    }

    #[inline]
    pub fn norms(&self) -> &[f32] {
        &self.norms
    }

    #[inline]
    pub fn exponent_a(&self) -> f32 {
        self.exponent_a
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Reorder norms to follow a column permutation (norm j moves with its channel).
    pub fn permuted(&self, input_perm: &[usize]) -> Result<Self> {
        if input_perm.len() != self.norms.len() {
            return Err(VnmError::LengthMismatch {
                what: "activation norm permutation",
                expected: self.norms.len(),
                actual: input_perm.len(),
            });
        }
        Ok(Self {
            norms: input_perm.iter().map(|&j| self.norms[j]).collect(),
            exponent_a: self.exponent_a,
        })
    }

    /// Extend with zero norms for padded input channels.
    pub fn padded(&self, new_len: usize) -> Self {
        let mut norms = self.norms.clone();
        norms.resize(new_len.max(norms.len()), 0.0);
        Self {
            norms,
            exponent_a: self.exponent_a,
        }
    }
}

/// Elementwise |w|.
pub fn abs_scores(w: &DenseMatrix) -> ImportanceMatrix {
    ImportanceMatrix {
        rows: w.rows(),
        cols: w.cols(),
        scores: w.values().iter().map(|v| v.abs()).collect(),
    }
}

/// Relative importance and activation.
pub fn ria_scores(w: &DenseMatrix, act: &ActivationNorms) -> Result<ImportanceMatrix> {
    if act.len() != w.cols() {
        return Err(VnmError::LengthMismatch {
            what: "activation norms vs matrix columns",
            expected: w.cols(),
            actual: act.len(),
        });
    }
    let (rows, cols) = w.shape();
    let mut col_sums = vec![0.0f64; cols];
    let mut row_sums = vec![0.0f64; rows];
    for (i, row_sum) in row_sums.iter_mut().enumerate() {
        for (j, &v) in w.row(i).iter().enumerate() {
            let a = (v as f64).abs();
            col_sums[j] += a;
            *row_sum += a;
        }
    }
    let a_exp = act.exponent_a() as f64;
    let factors: Vec<f64> = act
        .norms()
        .iter()
        .map(|&n| (n as f64).powf(a_exp))
        .collect();
    let mut scores = Vec::with_capacity(rows * cols);
    for (i, &row_sum) in row_sums.iter().enumerate() {
        for (j, &v) in w.row(i).iter().enumerate() {
            let a = (v as f64).abs();
            let col_frac = if col_sums[j] == 0.0 {
                0.0
            } else {
                a / col_sums[j]
            };
            let row_frac = if row_sum == 0.0 { 0.0 } else { a / row_sum };
            scores.push(((col_frac + row_frac) * factors[j]) as f32);
        }
    }
    ImportanceMatrix::from_vec(rows, cols, scores)
}
