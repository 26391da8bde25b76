//! Fixture builders shared by the criterion benches.

use vnm_core::importance::abs_scores;
use vnm_core::matrix::DenseMatrix;
use vnm_core::packed::{pack, PackedVnm};
use vnm_core::pattern::VnmPattern;
use vnm_core::pruner::{apply_mask, prune_vnm};

/// A pruned, packed weight plus a dense operand of the given width.
pub fn packed_fixture(
    rows: usize,
    cols: usize,
    x_cols: usize,
    v: usize,
    m: usize,
    seed: u64,
) -> (DenseMatrix, PackedVnm, DenseMatrix) {
    let pattern = VnmPattern::new(v, m).expect("valid pattern");
    let w = DenseMatrix::random(rows, cols, seed);
    let mask = prune_vnm(&abs_scores(&w), &pattern).expect("divisible dims");
    let wp = apply_mask(&w, &mask).expect("shapes match");
    let packed = pack(&wp, &mask).expect("valid mask");
    let x = DenseMatrix::random(cols, x_cols, seed.wrapping_add(1));
    (wp, packed, x)
}
