//! Row-major dense matrix of 32-bit reals.
//!
//! The toolkit targets desk-scale shapes (a few thousand on a side), so a
//! flat `Vec<f32>` with no tiling is the whole story. Constructors reject
//! NaN/Inf so downstream argmax and tie-breaking stay total. Values are
//! immutable after construction; every operation returns a new matrix.

use crate::error::{Result, VnmError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl DenseMatrix {
    /// Build from a row-major value buffer. Rejects non-finite entries and
    /// length/shape disagreements.
    pub fn from_vec(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(VnmError::InvalidPattern(format!(
                "matrix dims must be positive, got {rows}x{cols}"
            )));
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| VnmError::DimOverflow(format!("{rows}x{cols}")))?;
        if values.len() != expected {
            return Err(VnmError::LengthMismatch {
                what: "matrix values",
                expected,
                actual: values.len(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(VnmError::NonFinite {
                what: "matrix values",
                index: idx,
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    /// Standard-normal matrix from a deterministic ChaCha stream.
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..rows * cols)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                x as f32
            })
            .collect();
        Self { rows, cols, values }
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
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        debug_assert!(i < self.rows && j < self.cols);
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Dense matrix product with f64 accumulation, rounded to f32 at the end.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(VnmError::ShapeMismatch {
                what: "matmul operands",
                expected: (self.cols, self.cols),
                actual: (rhs.rows, rhs.cols),
            });
        }
        let mut out = vec![0.0f64; self.rows * rhs.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &w) in self.row(i).iter().enumerate() {
                let w = w as f64;
                let x_row = rhs.row(k);
                for (o, &x) in out_row.iter_mut().zip(x_row.iter()) {
                    *o += w * x as f64;
                }
            }
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: rhs.cols,
            values: out.into_iter().map(|v| v as f32).collect(),
        })
    }

    /// Max |a - b| / max(1, |b|) over all entries; operand for tolerance checks.
    pub fn max_rel_diff(&self, other: &DenseMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(VnmError::ShapeMismatch {
                what: "rel-diff operands",
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        let mut worst = 0.0f64;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            let denom = (*b as f64).abs().max(1.0);
            worst = worst.max(((*a as f64) - (*b as f64)).abs() / denom);
        }
        Ok(worst)
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_bad_length() {
        assert!(matches!(
            DenseMatrix::from_vec(2, 2, vec![1.0, f32::NAN, 0.0, 0.0]),
            Err(VnmError::NonFinite { .. })
        ));
        assert!(matches!(
            DenseMatrix::from_vec(2, 2, vec![1.0; 3]),
            Err(VnmError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn matmul_matches_hand_computed() {
        let a = DenseMatrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = DenseMatrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.values(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn random_is_deterministic() {
        let a = DenseMatrix::random(4, 5, 7);
        let b = DenseMatrix::random(4, 5, 7);
        assert_eq!(a, b);
        assert_ne!(a, DenseMatrix::random(4, 5, 8));
    }
}
