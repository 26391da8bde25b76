//! Wall-clock benchmark harness: packed spmm vs dense matmul.
//!
//! Median of 9 runs after 3 warmups, single-threaded. Packing, pruning and
//! permutation stay outside the timed region; only the matmul itself is
//! measured. Shapes are padded per pattern before packing, and the dense
//! baseline runs at the original shape, so padding overhead lands on the
//! sparse side the way deployment would see it. Absolute speedups are
//! machine-dependent; only directions are meaningful.

use crate::error::Result;
use crate::importance::abs_scores;
use crate::matrix::DenseMatrix;
use crate::packed::{pack, spmm};
use crate::pattern::VnmPattern;
use crate::pruner::{apply_mask, pad_weights, prune_vnm};
use crate::selection::{SpeedupTable, TableKey};
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const WARMUP_RUNS: usize = 3;
pub const TIMED_RUNS: usize = 9;

/// One benchmark shape: weight rows x weight cols, times an operand with
/// `x_cols` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSize {
    pub rows: usize,
    pub cols: usize,
    pub x_cols: usize,
}

impl BenchSize {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('x').collect();
        let err = || {
            crate::error::VnmError::InvalidConfig(format!(
                "bench size must look like 1024x1024x1024, got {s:?}"
            ))
        };
        if parts.len() != 3 {
            return Err(err());
        }
        let dims: Vec<usize> = parts
            .iter()
            .map(|p| p.parse().map_err(|_| err()))
            .collect::<Result<_>>()?;
        if dims.contains(&0) {
            return Err(err());
        }
        Ok(Self {
            rows: dims[0],
            cols: dims[1],
            x_cols: dims[2],
        })
    }
}

/// Timing detail for one (size, pattern) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchCell {
    pub size: BenchSize,
    pub pattern_v: usize,
    pub pattern_m: usize,
    pub dense_median_s: f64,
    pub spmm_median_s: f64,
    pub speedup: f64,
    pub dense_spread_s: f64,
    pub spmm_spread_s: f64,
    pub runs: usize,
}

/// Full harness output: per-cell timings plus the aggregated table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
    pub warmups: usize,
    pub runs: usize,
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    samples[samples.len() / 2]
}

fn time_runs<F: FnMut()>(mut f: F) -> (f64, f64) {
    for _ in 0..WARMUP_RUNS {
        f();
    }
    let mut samples = Vec::with_capacity(TIMED_RUNS);
    for _ in 0..TIMED_RUNS {
        let start = Instant::now();
        f();
        samples.push(start.elapsed().as_secs_f64());
    }
    let spread = samples.iter().cloned().fold(f64::MIN, f64::max)
        - samples.iter().cloned().fold(f64::MAX, f64::min);
    (median(&mut samples), spread)
}

/// Run the harness over every size x pattern combination.
pub fn run_bench(sizes: &[BenchSize], patterns: &[VnmPattern], seed: u64) -> Result<BenchReport> {
    let mut cells = Vec::new();
    for (idx, &size) in sizes.iter().enumerate() {
        let w = DenseMatrix::random(size.rows, size.cols, seed.wrapping_add(idx as u64));
        let x = DenseMatrix::random(size.cols, size.x_cols, seed.wrapping_add(1000 + idx as u64));

        let mut dense_out = None;
        let (dense_median_s, dense_spread_s) = time_runs(|| {
            dense_out = Some(w.matmul(&x).expect("shapes agree"));
        });
        drop(dense_out);

        for pattern in patterns {
            // setup (pad, prune, pack, pad operand) is untimed
            let (padded, _) = pad_weights(&w, pattern);
            let mask = prune_vnm(&abs_scores(&padded), pattern)?;
            let wp = apply_mask(&padded, &mask)?;
            let packed = pack(&wp, &mask)?;
            let x_padded = if padded.cols() == size.cols {
                x.clone()
            } else {
                let mut values = vec![0.0f32; padded.cols() * size.x_cols];
                values[..size.cols * size.x_cols].copy_from_slice(x.values());
                DenseMatrix::from_vec(padded.cols(), size.x_cols, values)?
            };

            let mut spmm_out = None;
            let (spmm_median_s, spmm_spread_s) = time_runs(|| {
                spmm_out = Some(spmm(&packed, &x_padded).expect("shapes agree"));
            });
            drop(spmm_out);

            cells.push(BenchCell {
                size,
                pattern_v: pattern.v(),
                pattern_m: pattern.m(),
                dense_median_s,
                spmm_median_s,
                speedup: dense_median_s / spmm_median_s,
                dense_spread_s,
                spmm_spread_s,
                runs: TIMED_RUNS,
            });
        }
    }
    Ok(BenchReport {
        cells,
        warmups: WARMUP_RUNS,
        runs: TIMED_RUNS,
    })
}

impl BenchReport {
    /// Aggregate to a SpeedupTable: per pattern, total dense time over total
    /// spmm time across sizes. M = 4 cells land on the 2:4 baseline key.
    pub fn to_speedup_table(&self, batch_size: u32) -> Result<SpeedupTable> {
        let mut table = SpeedupTable::new(batch_size);
        let mut keys: Vec<(usize, usize)> = self
            .cells
            .iter()
            .map(|c| (c.pattern_v, c.pattern_m))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        for (v, m) in keys {
            let (mut dense, mut sparse) = (0.0, 0.0);
            for cell in self
                .cells
                .iter()
                .filter(|c| c.pattern_v == v && c.pattern_m == m)
            {
                dense += cell.dense_median_s;
                sparse += cell.spmm_median_s;
            }
            let key = if m == 4 {
                TableKey::Baseline24
            } else {
                TableKey::Pattern {
                    v: v as u64,
                    m: m as u64,
                }
            };
            table.insert(key, dense / sparse)?;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_parsing() {
        let s = BenchSize::parse("64x40x8").unwrap();
        assert_eq!((s.rows, s.cols, s.x_cols), (64, 40, 8));
        assert!(BenchSize::parse("64x40").is_err());
        assert!(BenchSize::parse("64x0x8").is_err());
        assert!(BenchSize::parse("ax40x8").is_err());
    }

    #[test]
    fn tiny_shapes_produce_a_well_formed_report() {
        // speedups may be < 1 here; only harness plumbing is under test
        let sizes = [BenchSize {
            rows: 16,
            cols: 20,
            x_cols: 4,
        }];
        let patterns = [
            VnmPattern::new(2, 5).unwrap(),
            VnmPattern::new(2, 4).unwrap(),
        ];
        let report = run_bench(&sizes, &patterns, 3).unwrap();
        assert_eq!(report.cells.len(), 2);
        for cell in &report.cells {
            assert!(cell.dense_median_s > 0.0);
            assert!(cell.spmm_median_s > 0.0);
            assert!(cell.speedup.is_finite() && cell.speedup > 0.0);
        }
        let table = report.to_speedup_table(1).unwrap();
        assert_eq!(table.len(), 2);
        assert!(table.get(&TableKey::Baseline24).is_some());
        let csv = table.to_csv();
        let reparsed = SpeedupTable::from_csv(&csv, 1).unwrap();
        assert_eq!(reparsed, table);
    }

    #[test]
    fn dense_vs_dense_is_about_one() {
        // timing a kernel against itself: the ratio is 1 up to timer noise
        let w = DenseMatrix::random(64, 64, 5);
        let x = DenseMatrix::random(64, 64, 6);
        let (a, _) = time_runs(|| {
            let _ = w.matmul(&x).unwrap();
        });
        let (b, _) = time_runs(|| {
            let _ = w.matmul(&x).unwrap();
        });
        let ratio = a / b;
        assert!(ratio > 0.2 && ratio < 5.0, "ratio {ratio}");
    }
}
