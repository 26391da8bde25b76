//! Compressed V:N:M storage and the reference sparse matmul.
//!
//! A masked matrix is stored as three arrays:
//!
//! - `A_n`, rows × (2·cols/M) f32: the two surviving values per row per
//!   block, left to right, relative positions preserved;
//! - `A_i1`, (rows/V) × (cols/M) × 4 u8: each block's four retained column
//!   indices (relative to the block), strictly ascending;
//! - `A_i2`, same shape as `A_n`, u8: the position (0..3) of each value
//!   within its block's retained quadruple.
//!
//! `spmm` reads only these arrays and gathers rows of the dense operand;
//! it performs exactly rows·(2·cols/M)·x_cols multiplies, a 2/M fraction
//! of the dense count.

use crate::error::{Result, VnmError};
use crate::mask::SparseMask;
use crate::matrix::DenseMatrix;
use crate::pattern::VnmPattern;

#[derive(Debug, Clone, PartialEq)]
pub struct PackedVnm {
    pattern: VnmPattern,
    rows: usize,
    cols: usize,
    a_n: Vec<f32>,
    a_i1: Vec<u8>,
    a_i2: Vec<u8>,
}

impl PackedVnm {
    /// Assemble from raw arrays, validating every structural invariant.
    /// This is the entry point for file decoding.
    pub fn from_parts(
        pattern: VnmPattern,
        rows: usize,
        cols: usize,
        a_n: Vec<f32>,
        a_i1: Vec<u8>,
        a_i2: Vec<u8>,
    ) -> Result<Self> {
        let (v, m) = (pattern.v(), pattern.m());
        if m > 255 {
            return Err(VnmError::InvalidPattern(format!(
                "packed format uses 8-bit column indices; M must be <= 255, got {m}"
            )));
        }
        if rows == 0 || cols == 0 || !rows.is_multiple_of(v) || !cols.is_multiple_of(m) {
            return Err(VnmError::NotDivisible { rows, cols, v, m });
        }
        let nnz_per_row = 2 * cols / m;
        if a_n.len() != rows * nnz_per_row {
            return Err(VnmError::LengthMismatch {
                what: "A_n",
                expected: rows * nnz_per_row,
                actual: a_n.len(),
            });
        }
        if a_i2.len() != a_n.len() {
            return Err(VnmError::LengthMismatch {
                what: "A_i2",
                expected: a_n.len(),
                actual: a_i2.len(),
            });
        }
        let blocks = (rows / v) * (cols / m);
        if a_i1.len() != blocks * 4 {
            return Err(VnmError::LengthMismatch {
                what: "A_i1",
                expected: blocks * 4,
                actual: a_i1.len(),
            });
        }
        for (b, quad) in a_i1.chunks_exact(4).enumerate() {
            let ascending = quad[0] < quad[1] && quad[1] < quad[2] && quad[2] < quad[3];
            if !ascending || quad[3] as usize >= m {
                return Err(VnmError::InvalidPacked(format!(
                    "A_i1 quadruple {quad:?} of block {b} must be strictly ascending and < M"
                )));
            }
        }
        for (i, pair) in a_i2.chunks_exact(2).enumerate() {
            if pair[0] >= 4 || pair[1] >= 4 {
                return Err(VnmError::InvalidPacked(format!(
                    "A_i2 entry out of range at group {i}: {pair:?}"
                )));
            }
            if pair[0] >= pair[1] {
                return Err(VnmError::InvalidPacked(format!(
                    "A_i2 pair {pair:?} of group {i} must be strictly increasing"
                )));
            }
        }
        if let Some(idx) = a_n.iter().position(|x| !x.is_finite()) {
            return Err(VnmError::NonFinite {
                what: "A_n",
                index: idx,
            });
        }
        Ok(Self {
            pattern,
            rows,
            cols,
            a_n,
            a_i1,
            a_i2,
        })
    }

    #[inline]
    pub fn pattern(&self) -> VnmPattern {
        self.pattern
    }

    /// Logical (padded) dense row count.
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Logical (padded) dense column count.
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn a_n(&self) -> &[f32] {
        &self.a_n
    }

    #[inline]
    pub fn a_i1(&self) -> &[u8] {
        &self.a_i1
    }

    #[inline]
    pub fn a_i2(&self) -> &[u8] {
        &self.a_i2
    }

    #[inline]
    fn nnz_per_row(&self) -> usize {
        2 * self.cols / self.pattern.m()
    }

    /// Retained quadruple of block (block_row, block_col).
    #[inline]
    fn quad(&self, block_row: usize, block_col: usize) -> &[u8] {
        let b = block_row * (self.cols / self.pattern.m()) + block_col;
        &self.a_i1[b * 4..b * 4 + 4]
    }
}

/// Convert a masked matrix to packed form. The matrix must be exactly zero
/// off-mask, and the mask must validate.
pub fn pack(w_masked: &DenseMatrix, mask: &SparseMask) -> Result<PackedVnm> {
    if w_masked.shape() != (mask.rows(), mask.cols()) {
        return Err(VnmError::ShapeMismatch {
            what: "pack operands",
            expected: (mask.rows(), mask.cols()),
            actual: w_masked.shape(),
        });
    }
    let report = mask.validate()?;
    if !report.ok() {
        let first = &report.violations()[0];
        return Err(VnmError::InvalidMask(format!(
            "block ({}, {}): {}",
            first.block_row, first.block_col, first.reason
        )));
    }
    let pattern = mask.pattern();
    let (v, m) = (pattern.v(), pattern.m());
    if m > 255 {
        return Err(VnmError::InvalidPattern(format!(
            "packed format uses 8-bit column indices; M must be <= 255, got {m}"
        )));
    }
    let (rows, cols) = w_masked.shape();
    for i in 0..rows {
        for j in 0..cols {
            if !mask.get(i, j) && w_masked.get(i, j) != 0.0 {
                return Err(VnmError::InvalidMask(format!(
                    "value at ({i}, {j}) is nonzero outside the mask"
                )));
            }
        }
    }

    let block_cols = cols / m;
    let nnz_per_row = 2 * block_cols;
    let mut a_n = Vec::with_capacity(rows * nnz_per_row);
    let mut a_i2 = Vec::with_capacity(rows * nnz_per_row);
    let mut a_i1 = Vec::with_capacity((rows / v) * block_cols * 4);
    for br in 0..rows / v {
        for bc in 0..block_cols {
            for s in mask.retained_for(br, bc) {
                a_i1.push(s as u8);
            }
        }
    }
    for i in 0..rows {
        let br = i / v;
        for bc in 0..block_cols {
            let quad = mask.retained_for(br, bc);
            for (pos, &s) in quad.iter().enumerate() {
                let j = bc * m + s as usize;
                if mask.get(i, j) {
                    a_n.push(w_masked.get(i, j));
                    a_i2.push(pos as u8);
                }
            }
        }
    }
    PackedVnm::from_parts(pattern, rows, cols, a_n, a_i1, a_i2)
}

/// Expand back to a dense matrix: zeros everywhere except encoded positions.
pub fn unpack(p: &PackedVnm) -> Result<DenseMatrix> {
    let (rows, cols) = (p.rows(), p.cols());
    let m = p.pattern().m();
    let v = p.pattern().v();
    let block_cols = cols / m;
    let nnz_per_row = p.nnz_per_row();
    let mut values = vec![0.0f32; rows * cols];
    for i in 0..rows {
        let br = i / v;
        for bc in 0..block_cols {
            for k in 0..2 {
                let flat = i * nnz_per_row + bc * 2 + k;
                let pos = p.a_i2[flat] as usize;
                if pos >= 4 {
                    return Err(VnmError::InvalidPacked(format!(
                        "A_i2 entry {pos} out of range at flat index {flat}"
                    )));
                }
                let s = p.quad(br, bc)[pos] as usize;
                if s >= m {
                    return Err(VnmError::InvalidPacked(format!(
                        "A_i1 column {s} out of range (M={m})"
                    )));
                }
                values[i * cols + bc * m + s] = p.a_n[flat];
            }
        }
    }
    DenseMatrix::from_vec(rows, cols, values)
}

/// Reconstruct the mask encoded in the packed arrays.
pub fn unpack_mask(p: &PackedVnm) -> Result<SparseMask> {
    let (rows, cols) = (p.rows(), p.cols());
    let m = p.pattern().m();
    let v = p.pattern().v();
    let block_cols = cols / m;
    let nnz_per_row = p.nnz_per_row();
    let mut bits = vec![false; rows * cols];
    let mut retained = Vec::with_capacity((rows / v) * block_cols);
    for quad in p.a_i1.chunks_exact(4) {
        retained.push([
            quad[0] as u32,
            quad[1] as u32,
            quad[2] as u32,
            quad[3] as u32,
        ]);
    }
    for i in 0..rows {
        let br = i / v;
        for bc in 0..block_cols {
            for k in 0..2 {
                let flat = i * nnz_per_row + bc * 2 + k;
                let s = p.quad(br, bc)[p.a_i2[flat] as usize] as usize;
                bits[i * cols + bc * m + s] = true;
            }
        }
    }
    SparseMask::with_retained(p.pattern(), rows, cols, bits, retained)
}

fn check_spmm_shapes(p: &PackedVnm, x: &DenseMatrix) -> Result<()> {
    if x.rows() != p.cols() {
        return Err(VnmError::ShapeMismatch {
            what: "spmm operands",
            expected: (p.cols(), x.cols()),
            actual: x.shape(),
        });
    }
    Ok(())
}

/// Sparse × dense product reading only the packed arrays. f64 accumulation,
/// rounded once per output entry.
pub fn spmm(p: &PackedVnm, x: &DenseMatrix) -> Result<DenseMatrix> {
    check_spmm_shapes(p, x)?;
    let (rows, cols) = (p.rows(), p.cols());
    let m = p.pattern().m();
    let v = p.pattern().v();
    let block_cols = cols / m;
    let nnz_per_row = p.nnz_per_row();
    let xc = x.cols();
    let mut out = vec![0.0f64; rows * xc];
    let mut values = Vec::with_capacity(rows * xc);
    for i in 0..rows {
        let br = i / v;
        let acc = &mut out[i * xc..(i + 1) * xc];
        for bc in 0..block_cols {
            let quad = p.quad(br, bc);
            for k in 0..2 {
                let flat = i * nnz_per_row + bc * 2 + k;
                let w = p.a_n[flat] as f64;
                let col = bc * m + quad[p.a_i2[flat] as usize] as usize;
                let x_row = x.row(col);
                for (o, &xv) in acc.iter_mut().zip(x_row.iter()) {
                    *o += w * xv as f64;
                }
            }
        }
        values.extend(acc.iter().map(|&o| o as f32));
    }
    Ok(DenseMatrix::from_vec_unchecked(rows, xc, values))
}

/// `spmm` plus an exact count of scalar multiplies performed.
pub fn spmm_counted(p: &PackedVnm, x: &DenseMatrix) -> Result<(DenseMatrix, u64)> {
    check_spmm_shapes(p, x)?;
    let (rows, cols) = (p.rows(), p.cols());
    let m = p.pattern().m();
    let v = p.pattern().v();
    let block_cols = cols / m;
    let nnz_per_row = p.nnz_per_row();
    let xc = x.cols();
    let mut mults = 0u64;
    let mut out = vec![0.0f64; rows * xc];
    for i in 0..rows {
        let br = i / v;
        let acc = &mut out[i * xc..(i + 1) * xc];
        for bc in 0..block_cols {
            let quad = p.quad(br, bc);
            for k in 0..2 {
                let flat = i * nnz_per_row + bc * 2 + k;
                let w = p.a_n[flat] as f64;
                let col = bc * m + quad[p.a_i2[flat] as usize] as usize;
                for (o, &xv) in acc.iter_mut().zip(x.row(col).iter()) {
                    *o += w * xv as f64;
                    mults += 1;
                }
            }
        }
    }
    let values = out.into_iter().map(|o| o as f32).collect();
    Ok((DenseMatrix::from_vec_unchecked(rows, xc, values), mults))
}

/// Multiply count of `spmm` relative to a dense matmul of the same shape: 2/M.
pub fn flop_ratio(pattern: &VnmPattern) -> f64 {
    2.0 / pattern.m() as f64
}

/// Closed-form multiply count of `spmm(p, x)` for an x with `x_cols` columns.
pub fn count_mults(p: &PackedVnm, x_cols: usize) -> u64 {
    (p.rows() as u64) * (p.nnz_per_row() as u64) * (x_cols as u64)
}
