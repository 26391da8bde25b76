//! Three-step V:N:M pruning, weight padding, and mask application.
//!
//! Per V×M block: rank columns by the L1 norm of their importance scores
//! over the block's rows, keep the top 4, then keep the top 2 scores per
//! row among the survivors. Ties break toward the smaller column index at
//! both steps so identical inputs always produce identical masks.

use crate::error::{Result, VnmError};
use crate::importance::ImportanceMatrix;
use crate::mask::SparseMask;
use crate::matrix::DenseMatrix;
use crate::pattern::VnmPattern;
use serde::{Deserialize, Serialize};

/// Shapes before and after zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddingRecord {
    pub original_rows: usize,
    pub original_cols: usize,
    pub padded_rows: usize,
    pub padded_cols: usize,
}

impl PaddingRecord {
    pub fn is_noop(&self) -> bool {
        self.original_rows == self.padded_rows && self.original_cols == self.padded_cols
    }
}

fn round_up(n: usize, multiple: usize) -> usize {
    n.div_ceil(multiple) * multiple
}

/// Zero-pad so rows divide V and columns divide M. Added entries are exactly 0.
pub fn pad_weights(w: &DenseMatrix, pattern: &VnmPattern) -> (DenseMatrix, PaddingRecord) {
    let record = PaddingRecord {
        original_rows: w.rows(),
        original_cols: w.cols(),
        padded_rows: round_up(w.rows(), pattern.v()),
        padded_cols: round_up(w.cols(), pattern.m()),
    };
    if record.is_noop() {
        return (w.clone(), record);
    }
    let mut values = vec![0.0f32; record.padded_rows * record.padded_cols];
    for i in 0..w.rows() {
        values[i * record.padded_cols..i * record.padded_cols + w.cols()].copy_from_slice(w.row(i));
    }
    (
        DenseMatrix::from_vec(record.padded_rows, record.padded_cols, values)
            .expect("padded buffer has matching length"),
        record,
    )
}

/// Crop a padded matrix back to the recorded original shape.
pub fn unpad_weights(w: &DenseMatrix, record: &PaddingRecord) -> Result<DenseMatrix> {
    if w.rows() != record.padded_rows || w.cols() != record.padded_cols {
        return Err(VnmError::ShapeMismatch {
            what: "unpad input",
            expected: (record.padded_rows, record.padded_cols),
            actual: w.shape(),
        });
    }
    let mut values = Vec::with_capacity(record.original_rows * record.original_cols);
    for i in 0..record.original_rows {
        values.extend_from_slice(&w.row(i)[..record.original_cols]);
    }
    DenseMatrix::from_vec(record.original_rows, record.original_cols, values)
}

/// Indices of the k largest values, ties toward the smaller index.
/// `values` is small (m or 4 entries), so a partial selection scan is fine.
/// Shared with the permutation module so both sides apply one tie rule.
pub(crate) fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order.sort_unstable();
    order
}

/// The three-step S_{V:N:M} pruning procedure.
pub fn prune_vnm(scores: &ImportanceMatrix, pattern: &VnmPattern) -> Result<SparseMask> {
    let (rows, cols) = (scores.rows(), scores.cols());
    let (v, m) = (pattern.v(), pattern.m());
    if rows % v != 0 || cols % m != 0 {
        return Err(VnmError::NotDivisible { rows, cols, v, m });
    }
    let block_rows = rows / v;
    let block_cols = cols / m;
    let mut bits = vec![false; rows * cols];
    let mut retained = Vec::with_capacity(block_rows * block_cols);
    let mut col_l1 = vec![0.0f64; m];
    for br in 0..block_rows {
        for bc in 0..block_cols {
            // Step 2: column pruning by L1 norm of the scores.
            col_l1.iter_mut().for_each(|x| *x = 0.0);
            for r in br * v..(br + 1) * v {
                for (s, l1) in col_l1.iter_mut().enumerate() {
                    *l1 += scores.get(r, bc * m + s) as f64;
                }
            }
            let keep_cols = top_k_indices(&col_l1, 4);

            // Step 3: 2:4 within the four survivors, per row.
            for r in br * v..(br + 1) * v {
                let row_scores: Vec<f64> = keep_cols
                    .iter()
                    .map(|&s| scores.get(r, bc * m + s) as f64)
                    .collect();
                for &pos in &top_k_indices(&row_scores, 2) {
                    bits[r * cols + bc * m + keep_cols[pos]] = true;
                }
            }
            retained.push([
                keep_cols[0] as u32,
                keep_cols[1] as u32,
                keep_cols[2] as u32,
                keep_cols[3] as u32,
            ]);
        }
    }
    SparseMask::with_retained(*pattern, rows, cols, bits, retained)
}

/// W' = W ⊙ M.
pub fn apply_mask(w: &DenseMatrix, mask: &SparseMask) -> Result<DenseMatrix> {
    if w.shape() != (mask.rows(), mask.cols()) {
        return Err(VnmError::ShapeMismatch {
            what: "apply_mask operands",
            expected: (mask.rows(), mask.cols()),
            actual: w.shape(),
        });
    }
    let values = w
        .values()
        .iter()
        .zip(mask.bits().iter())
        .map(|(&v, &b)| if b { v } else { 0.0 })
        .collect();
    Ok(DenseMatrix::from_vec_unchecked(w.rows(), w.cols(), values))
}

/// Sum of importance scores over the mask's true positions.
pub fn retained_score(scores: &ImportanceMatrix, mask: &SparseMask) -> Result<f64> {
    if (scores.rows(), scores.cols()) != (mask.rows(), mask.cols()) {
        return Err(VnmError::ShapeMismatch {
            what: "retained_score operands",
            expected: (mask.rows(), mask.cols()),
            actual: (scores.rows(), scores.cols()),
        });
    }
    Ok(scores
        .scores()
        .iter()
        .zip(mask.bits().iter())
        .filter(|(_, &b)| b)
        .map(|(&s, _)| s as f64)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::abs_scores;

    fn pattern(v: usize, m: usize) -> VnmPattern {
        VnmPattern::new(v, m).unwrap()
    }

    #[test]
    fn padding_rounds_up_to_block_multiples() {
        let w = DenseMatrix::random(5, 7, 1);
        let (padded, rec) = pad_weights(&w, &pattern(2, 5));
        assert_eq!(padded.shape(), (6, 10));
        assert_eq!((rec.original_rows, rec.original_cols), (5, 7));
        // fringe is exactly zero
        for i in 0..6 {
            for j in 0..10 {
                if i < 5 && j < 7 {
                    assert_eq!(padded.get(i, j), w.get(i, j));
                } else {
                    assert_eq!(padded.get(i, j), 0.0);
                }
            }
        }
        assert_eq!(unpad_weights(&padded, &rec).unwrap(), w);
    }

    #[test]
    fn padding_noop_when_divisible() {
        let w = DenseMatrix::random(4, 10, 2);
        let (padded, rec) = pad_weights(&w, &pattern(2, 5));
        assert!(rec.is_noop());
        assert_eq!(padded, w);
    }

    #[test]
    fn padding_tiny_matrix() {
        let w = DenseMatrix::from_vec(1, 1, vec![3.0]).unwrap();
        let (padded, rec) = pad_weights(&w, &pattern(16, 5));
        assert_eq!(padded.shape(), (16, 5));
        assert_eq!(rec.padded_rows, 16);
        assert_eq!(padded.get(0, 0), 3.0);
        assert_eq!(padded.values().iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn prune_single_block_descending_scores() {
        // [5,4,3,2,1] with v=1, m=5: retain columns {0,1,2,3}, keep {0,1}.
        let scores = ImportanceMatrix::from_vec(1, 5, vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let mask = prune_vnm(&scores, &pattern(1, 5)).unwrap();
        assert_eq!(mask.retained_for(0, 0), [0, 1, 2, 3]);
        assert_eq!(mask.bits(), &[true, true, false, false, false]);
        assert!(mask.validate().unwrap().ok());
    }

    #[test]
    fn zero_column_is_never_retained_against_positive_ones() {
        let scores = ImportanceMatrix::from_vec(
            2,
            5,
            vec![1.0, 2.0, 0.0, 3.0, 4.0, 2.0, 1.0, 0.0, 5.0, 6.0],
        )
        .unwrap();
        let mask = prune_vnm(&scores, &pattern(2, 5)).unwrap();
        assert_eq!(mask.retained_for(0, 0), [0, 1, 3, 4]);
        for r in 0..2 {
            assert!(!mask.get(r, 2));
        }
    }

    #[test]
    fn column_ties_break_toward_smaller_index() {
        let scores = ImportanceMatrix::from_vec(2, 5, vec![1.0; 10]).unwrap();
        let mask = prune_vnm(&scores, &pattern(2, 5)).unwrap();
        assert_eq!(mask.retained_for(0, 0), [0, 1, 2, 3]);
        // row ties also lean left
        for r in 0..2 {
            assert_eq!(
                (
                    mask.get(r, 0),
                    mask.get(r, 1),
                    mask.get(r, 2),
                    mask.get(r, 3)
                ),
                (true, true, false, false)
            );
        }
    }

    #[test]
    fn m4_degenerates_to_plain_two_four() {
        let w = DenseMatrix::random(8, 12, 9);
        let scores = abs_scores(&w);
        let mask = prune_vnm(&scores, &pattern(2, 4)).unwrap();
        // every 4-column group keeps its row-wise top 2
        for i in 0..8 {
            for g in 0..3 {
                let vals: Vec<f32> = (0..4).map(|s| w.get(i, g * 4 + s).abs()).collect();
                let mut order: Vec<usize> = (0..4).collect();
                order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap().then(a.cmp(&b)));
                for (pos, &s) in order.iter().enumerate() {
                    assert_eq!(mask.get(i, g * 4 + s), pos < 2);
                }
            }
        }
    }

    #[test]
    fn prune_is_deterministic_and_scale_invariant() {
        let w = DenseMatrix::random(4, 10, 33);
        let s1 = abs_scores(&w);
        let mask1 = prune_vnm(&s1, &pattern(2, 5)).unwrap();
        let mask2 = prune_vnm(&s1, &pattern(2, 5)).unwrap();
        assert_eq!(mask1, mask2);

        let scaled =
            ImportanceMatrix::from_vec(4, 10, s1.scores().iter().map(|x| x * 7.25).collect())
                .unwrap();
        assert_eq!(prune_vnm(&scaled, &pattern(2, 5)).unwrap(), mask1);
    }

    #[test]
    fn apply_mask_zeroes_exactly_off_mask() {
        let w = DenseMatrix::random(4, 10, 5);
        let mask = prune_vnm(&abs_scores(&w), &pattern(2, 5)).unwrap();
        let wp = apply_mask(&w, &mask).unwrap();
        for i in 0..4 {
            for j in 0..10 {
                if mask.get(i, j) {
                    assert_eq!(wp.get(i, j), w.get(i, j));
                } else {
                    assert_eq!(wp.get(i, j), 0.0);
                }
            }
        }

        let all_false = SparseMask::from_bits(pattern(2, 5), 4, 10, vec![false; 40]).unwrap();
        let zeroed = apply_mask(&w, &all_false).unwrap();
        assert!(zeroed.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn retained_score_counts_true_positions() {
        let scores = ImportanceMatrix::from_vec(2, 4, vec![1.0; 8]).unwrap();
        let mask = prune_vnm(&scores, &pattern(2, 4)).unwrap();
        // 2 rows x 2 kept per group x 1 group
        assert_eq!(retained_score(&scores, &mask).unwrap(), 4.0);

        let zeros = ImportanceMatrix::from_vec(2, 4, vec![0.0; 8]).unwrap();
        assert_eq!(retained_score(&zeros, &mask).unwrap(), 0.0);

        let w = DenseMatrix::random(4, 10, 21);
        let s = abs_scores(&w);
        let m = prune_vnm(&s, &pattern(2, 5)).unwrap();
        let brute: f64 = (0..4)
            .flat_map(|i| (0..10).map(move |j| (i, j)))
            .filter(|&(i, j)| m.get(i, j))
            .map(|(i, j)| s.get(i, j) as f64)
            .sum();
        assert!((retained_score(&s, &m).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn divisibility_is_enforced() {
        let scores = ImportanceMatrix::from_vec(3, 5, vec![1.0; 15]).unwrap();
        assert!(matches!(
            prune_vnm(&scores, &pattern(2, 5)),
            Err(VnmError::NotDivisible { .. })
        ));
    }
}
