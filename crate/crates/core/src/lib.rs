//! V:N:M semi-structured sparsity toolkit.
//!
//! A V:N:M pattern divides a weight matrix into V×M blocks, keeps 4 columns
//! per block, and applies 2:4 sparsity to the survivors. This crate covers
//! the full desk-scale workflow around that pattern:
//!
//! - importance scoring (ABS and RIA criteria),
//! - the three-step V:N:M pruner with weight padding,
//! - mask-diversity-driven (V, M) selection under a speedup threshold,
//! - channel permutation via alternating linear sum assignment,
//! - the compressed (A_n, A_i1, A_i2) storage format with a reference
//!   sparse matmul and a wall-clock benchmark harness,
//! - a deterministic teacher-student training sandbox for fixed-mask,
//!   SR-STE, and staged-LoRA schedules.
//!
//! Everything is CPU-only, deterministic given seeds, and sized for
//! matrices up to a few thousand on a side.

pub mod bench;
pub mod error;
pub mod importance;
pub mod io;
pub mod mask;
pub mod matrix;
pub mod packed;
pub mod pattern;
pub mod permutation;
pub mod pruner;
pub mod selection;
pub mod train;

pub use error::{Result, VnmError};
pub use importance::{ActivationNorms, ImportanceMatrix};
pub use mask::{SparseMask, ValidationReport};
pub use matrix::DenseMatrix;
pub use packed::PackedVnm;
pub use pattern::VnmPattern;
pub use permutation::PermutationPair;
pub use pruner::PaddingRecord;
pub use selection::{SpeedupTable, TableKey};
