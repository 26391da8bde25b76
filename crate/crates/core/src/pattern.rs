//! The (V, N, M) pattern triple.

use crate::error::{Result, VnmError};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A V:N:M sparsity pattern: V×M blocks, 4 retained columns per block,
/// N=2 survivors per row among them. N is fixed to 2; M=4 is the plain
/// 2:4 baseline (the column step keeps everything).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VnmPattern {
    v: usize,
    n: usize,
    m: usize,
}

impl VnmPattern {
    pub fn new(v: usize, m: usize) -> Result<Self> {
        if v < 1 {
            return Err(VnmError::InvalidPattern("V must be >= 1".into()));
        }
        if m < 4 {
            return Err(VnmError::InvalidPattern(format!("M must be >= 4, got {m}")));
        }
        Ok(Self { v, n: 2, m })
    }

    /// Parse "64:2:5"-style notation.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let err = || VnmError::InvalidPattern(format!("expected V:N:M, got {s:?}"));
        if parts.len() != 3 {
            return Err(err());
        }
        let v: usize = parts[0].parse().map_err(|_| err())?;
        let n: usize = parts[1].parse().map_err(|_| err())?;
        let m: usize = parts[2].parse().map_err(|_| err())?;
        if n != 2 {
            return Err(VnmError::InvalidPattern(format!("N must be 2, got {n}")));
        }
        Self::new(v, m)
    }

    #[inline]
    pub fn v(&self) -> usize {
        self.v
    }

    /// Always 2.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Fraction of weights retained: 2/M.
    #[inline]
    pub fn density(&self) -> f64 {
        2.0 / self.m as f64
    }

    /// True for the plain 2:4 pattern (M = 4).
    #[inline]
    pub fn is_two_four(&self) -> bool {
        self.m == 4
    }
}

impl fmt::Display for VnmPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.v, self.n, self.m)
    }
}
