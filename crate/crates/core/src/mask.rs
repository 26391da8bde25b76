//! V:N:M sparse masks and their structural validation.
//!
//! A mask records two things per V×M block: the quadruple of retained
//! columns chosen by the column-pruning step, and the 0-1 bits of the
//! final 2-per-row selection. Keeping the quadruple explicit matters:
//! for small V (v=1 especially) the true bits touch fewer than four
//! distinct columns, so the quadruple cannot be recovered from the bits
//! alone. Masks rebuilt from bare bits (e.g. a 0/1 tensor file) get a
//! canonical completion instead.

use crate::error::{Result, VnmError};
use crate::matrix::DenseMatrix;
use crate::pattern::VnmPattern;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMask {
    rows: usize,
    cols: usize,
    pattern: VnmPattern,
    bits: Vec<bool>,
    /// Retained column indices (relative to the block, ascending),
    /// one quadruple per block in (block_row, block_col) row-major order.
    retained: Vec<[u32; 4]>,
}

/// One structural violation, anchored to a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskViolation {
    pub block_row: usize,
    pub block_col: usize,
    pub reason: String,
}

/// Outcome of `SparseMask::validate`: ok, or the first violations found.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    violations: Vec<MaskViolation>,
    truncated: bool,
}

const MAX_REPORTED: usize = 10;

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[MaskViolation] {
        &self.violations
    }

    /// True when more violations existed than the report carries.
    pub fn truncated(&self) -> bool {
        self.truncated
    }
}

impl SparseMask {
    /// Assemble a mask from bits plus explicit per-block retained columns.
    /// Only lengths are checked here; structural validity is a separate
    /// concern (`validate`), so tests can build deliberately broken masks.
    pub fn with_retained(
        pattern: VnmPattern,
        rows: usize,
        cols: usize,
        bits: Vec<bool>,
        retained: Vec<[u32; 4]>,
    ) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(VnmError::LengthMismatch {
                what: "mask bits",
                expected: rows * cols,
                actual: bits.len(),
            });
        }
        let expected_blocks =
            if rows.is_multiple_of(pattern.v()) && cols.is_multiple_of(pattern.m()) {
                (rows / pattern.v()) * (cols / pattern.m())
            } else {
                0
            };
        if retained.len() != expected_blocks {
            return Err(VnmError::LengthMismatch {
                what: "mask retained-column table",
                expected: expected_blocks,
                actual: retained.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            pattern,
            bits,
            retained,
        })
    }

    /// Rebuild a mask from bare bits. Each block's retained quadruple is the
    /// set of columns holding true bits, completed with the smallest unused
    /// in-block columns and sorted ascending. Blocks with more than four true
    /// columns keep the first four; validation will flag them.
    pub fn from_bits(
        pattern: VnmPattern,
        rows: usize,
        cols: usize,
        bits: Vec<bool>,
    ) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(VnmError::LengthMismatch {
                what: "mask bits",
                expected: rows * cols,
                actual: bits.len(),
            });
        }
        let (v, m) = (pattern.v(), pattern.m());
        if !rows.is_multiple_of(v) || !cols.is_multiple_of(m) {
            return Err(VnmError::NotDivisible { rows, cols, v, m });
        }
        let block_rows = rows / v;
        let block_cols = cols / m;
        let mut retained = Vec::with_capacity(block_rows * block_cols);
        for br in 0..block_rows {
            for bc in 0..block_cols {
                let mut used = vec![false; m];
                for r in br * v..(br + 1) * v {
                    for s in 0..m {
                        if bits[r * cols + bc * m + s] {
                            used[s] = true;
                        }
                    }
                }
                let mut quad: Vec<u32> = (0..m as u32).filter(|&s| used[s as usize]).collect();
                quad.truncate(4);
                let mut fill = 0u32;
                while quad.len() < 4 {
                    if !quad.contains(&fill) {
                        quad.push(fill);
                    }
                    fill += 1;
                }
                quad.sort_unstable();
                retained.push([quad[0], quad[1], quad[2], quad[3]]);
            }
        }
        Ok(Self {
            rows,
            cols,
            pattern,
            bits,
            retained,
        })
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
    pub fn pattern(&self) -> VnmPattern {
        self.pattern
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    /// Retained quadruple of the block holding matrix row `i`, block column `bc`.
    #[inline]
    pub fn retained_for(&self, block_row: usize, block_col: usize) -> [u32; 4] {
        self.retained[block_row * (self.cols / self.pattern.m()) + block_col]
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of true bits; exactly 2/M for a valid mask.
    pub fn density(&self) -> f64 {
        self.popcount() as f64 / (self.rows * self.cols) as f64
    }

    /// Hamming distance between the bit planes.
    pub fn hamming(&self, other: &SparseMask) -> Result<usize> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(VnmError::ShapeMismatch {
                what: "mask hamming operands",
                expected: (self.rows, self.cols),
                actual: (other.rows, other.cols),
            });
        }
        Ok(self
            .bits
            .iter()
            .zip(other.bits.iter())
            .filter(|(a, b)| a != b)
            .count())
    }

    /// 0/1 matrix view of the bits (for tensor-file output).
    pub fn to_matrix(&self) -> DenseMatrix {
        let values = self
            .bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        DenseMatrix::from_vec_unchecked(self.rows, self.cols, values)
    }

    /// Structural validation. Errors when dims are not divisible by the
    /// pattern; otherwise reports per-block violations (first 10):
    /// - a row of a block with true-bit count != 2,
    /// - a true bit outside the block's retained quadruple,
    /// - a malformed quadruple (not strictly ascending, or out of range).
    pub fn validate(&self) -> Result<ValidationReport> {
        let (v, m) = (self.pattern.v(), self.pattern.m());
        if !self.rows.is_multiple_of(v) || !self.cols.is_multiple_of(m) {
            return Err(VnmError::NotDivisible {
                rows: self.rows,
                cols: self.cols,
                v,
                m,
            });
        }
        let block_rows = self.rows / v;
        let block_cols = self.cols / m;
        let mut violations = Vec::new();
        let mut truncated = false;
        'scan: for br in 0..block_rows {
            for bc in 0..block_cols {
                let quad = self.retained_for(br, bc);
                let mut block_bad = Vec::new();
                if !(quad[0] < quad[1] && quad[1] < quad[2] && quad[2] < quad[3]) {
                    block_bad.push(format!(
                        "retained quadruple {quad:?} not strictly ascending"
                    ));
                } else if quad[3] as usize >= m {
                    block_bad.push(format!("retained column {} out of range (M={m})", quad[3]));
                }
                for r in br * v..(br + 1) * v {
                    let mut count = 0usize;
                    let mut outside = None;
                    for s in 0..m {
                        if self.bits[r * self.cols + bc * m + s] {
                            count += 1;
                            if !quad.contains(&(s as u32)) {
                                outside = Some(s);
                            }
                        }
                    }
                    if count != 2 {
                        block_bad.push(format!("row {r} has {count} retained bits, want 2"));
                    }
                    if let Some(s) = outside {
                        block_bad.push(format!(
                            "row {r} keeps column {} outside retained set {quad:?}",
                            bc * m + s
                        ));
                    }
                }
                for reason in block_bad {
                    if violations.len() == MAX_REPORTED {
                        truncated = true;
                        break 'scan;
                    }
                    violations.push(MaskViolation {
                        block_row: br,
                        block_col: bc,
                        reason,
                    });
                }
            }
        }
        Ok(ValidationReport {
            violations,
            truncated,
        })
    }
}
