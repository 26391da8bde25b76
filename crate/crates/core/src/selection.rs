//! (V, M) selection: mask diversity and two-phase sifting.
//!
//! Mask diversity counts the distinct masks a pattern admits. Per element
//! of the weight matrix its log is
//!
//! ```text
//! ln K(V, M) = (ln C(M,4) + V ln C(4,2)) / (V M)
//! ```
//!
//! and the network-level ordering across (V, M) pairs equals the ln K
//! ordering regardless of layer shapes, so comparisons never need the raw
//! (astronomically large) counts. Sifting picks, under a speedup
//! threshold, the per-V smallest feasible M and then the survivor with
//! maximal ln K.

use crate::error::{Result, VnmError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// ln C(4,2)
const LN_6: f64 = 1.791759469228055;

fn ln_choose_4(m: u64) -> f64 {
    // ln C(m,4) in log domain; exact for any m >= 4 without overflow.
    let m = m as f64;
    (m.ln() + (m - 1.0).ln() + (m - 2.0).ln() + (m - 3.0).ln()) - 24.0f64.ln()
}

/// Per-element log mask diversity, ln K(V, M).
pub fn ln_k(v: u64, m: u64) -> Result<f64> {
    if v < 1 {
        return Err(VnmError::InvalidPattern("V must be >= 1".into()));
    }
    if m < 4 {
        return Err(VnmError::InvalidPattern(format!("M must be >= 4, got {m}")));
    }
    Ok((ln_choose_4(m) + v as f64 * LN_6) / (v * m) as f64)
}

/// Stable descending sort by ln K; ties preserve input order.
pub fn md_order(combos: &[(u64, u64)]) -> Result<Vec<(u64, u64)>> {
    let mut keyed: Vec<((u64, u64), f64)> = combos
        .iter()
        .map(|&(v, m)| Ok(((v, m), ln_k(v, m)?)))
        .collect::<Result<_>>()?;
    keyed.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("ln_k is finite"));
    Ok(keyed.into_iter().map(|(c, _)| c).collect())
}

/// Sparsity of any V:2:M pattern: 1 - 2/M.
pub fn sparsity_of(m: u64) -> f64 {
    1.0 - 2.0 / m as f64
}

/// Key of a speedup-table row. `Baseline24` is the distinguished (·, 4)
/// entry: plain 2:4 sparsity, whose ln K = ln6/4 is independent of V.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableKey {
    Baseline24,
    Pattern { v: u64, m: u64 },
}

impl TableKey {
    pub fn ln_k(&self) -> f64 {
        match self {
            TableKey::Baseline24 => LN_6 / 4.0,
            TableKey::Pattern { v, m } => ln_k(*v, *m).expect("table keys are validated"),
        }
    }

    pub fn m(&self) -> u64 {
        match self {
            TableKey::Baseline24 => 4,
            TableKey::Pattern { m, .. } => *m,
        }
    }

    /// Sort rank for tie-breaking: baseline first, then smaller v, smaller m.
    fn rank(&self) -> (u64, u64) {
        match self {
            TableKey::Baseline24 => (0, 4),
            TableKey::Pattern { v, m } => (*v, *m),
        }
    }
}

impl fmt::Display for TableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableKey::Baseline24 => write!(f, "(*, 4)"),
            TableKey::Pattern { v, m } => write!(f, "({v}, {m})"),
        }
    }
}

/// Measured speedups per (V, M), tagged with the batch size they were
/// measured at. Always ingested data, never predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTable {
    entries: BTreeMap<TableKey, f64>,
    batch_size: u32,
}

impl SpeedupTable {
    pub fn new(batch_size: u32) -> Self {
        Self {
            entries: BTreeMap::new(),
            batch_size,
        }
    }

    pub fn insert(&mut self, key: TableKey, speedup: f64) -> Result<()> {
        if !speedup.is_finite() || speedup <= 0.0 {
            return Err(VnmError::InvalidConfig(format!(
                "speedup for {key} must be a positive real, got {speedup}"
            )));
        }
        if let TableKey::Pattern { v, m } = key {
            if v < 1 || m < 4 {
                return Err(VnmError::InvalidPattern(format!("table key ({v}, {m})")));
            }
        }
        if self.entries.insert(key, speedup).is_some() {
            return Err(VnmError::Csv(format!("duplicate table key {key}")));
        }
        Ok(())
    }

    pub fn get(&self, key: &TableKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn batch_size(&self) -> u32 {
        self.batch_size
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TableKey, &f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parse the `v,m,speedup` CSV; a `*` in the v column marks the 2:4
    /// baseline row. Header row optional.
    pub fn from_csv(text: &str, batch_size: u32) -> Result<Self> {
        let mut table = Self::new(batch_size);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("v,m,speedup")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(VnmError::Csv(format!(
                    "line {}: expected v,m,speedup",
                    lineno + 1
                )));
            }
            let m: u64 = fields[1].parse().map_err(|_| {
                VnmError::Csv(format!("line {}: bad m {:?}", lineno + 1, fields[1]))
            })?;
            let key = if fields[0] == "*" {
                if m != 4 {
                    return Err(VnmError::Csv(format!(
                        "line {}: v=* rows must have m=4",
                        lineno + 1
                    )));
                }
                TableKey::Baseline24
            } else {
                let v: u64 = fields[0].parse().map_err(|_| {
                    VnmError::Csv(format!("line {}: bad v {:?}", lineno + 1, fields[0]))
                })?;
                TableKey::Pattern { v, m }
            };
            let speedup: f64 = fields[2].parse().map_err(|_| {
                VnmError::Csv(format!("line {}: bad speedup {:?}", lineno + 1, fields[2]))
            })?;
            table.insert(key, speedup)?;
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("v,m,speedup\n");
        for (key, speedup) in &self.entries {
            match key {
                TableKey::Baseline24 => out.push_str(&format!("*,4,{speedup}\n")),
                TableKey::Pattern { v, m } => out.push_str(&format!("{v},{m},{speedup}\n")),
            }
        }
        out
    }
}

/// Inputs of a sift: threshold, candidate grid and the measured table.
/// Grid entries missing from the table are infeasible.
#[derive(Debug, Clone)]
pub struct SelectionQuery {
    pub threshold_s: f64,
    pub candidate_v: Vec<u64>,
    /// Inclusive M interval; 4 admits the 2:4 baseline row.
    pub m_range: (u64, u64),
    pub table: SpeedupTable,
}

impl SelectionQuery {
    pub fn new(threshold_s: f64, table: SpeedupTable) -> Result<Self> {
        // Thresholds are nominally positive; 0 is admitted as the
        // "everything feasible" degenerate query.
        if !threshold_s.is_finite() || threshold_s < 0.0 {
            return Err(VnmError::InvalidConfig(format!(
                "speedup threshold must be a nonnegative real, got {threshold_s}"
            )));
        }
        Ok(Self {
            threshold_s,
            candidate_v: vec![16, 32, 64, 128],
            m_range: (4, 16),
            table,
        })
    }

    pub fn with_candidates(mut self, candidate_v: Vec<u64>, m_max: u64) -> Result<Self> {
        if candidate_v.is_empty() {
            return Err(VnmError::InvalidConfig("candidate V set is empty".into()));
        }
        if m_max < 4 {
            return Err(VnmError::InvalidConfig(format!(
                "m_max must be >= 4, got {m_max}"
            )));
        }
        self.candidate_v = candidate_v;
        self.candidate_v.sort_unstable();
        self.candidate_v.dedup();
        self.m_range = (4, m_max);
        Ok(self)
    }
}

/// A phase-1 survivor: the smallest feasible M for one V (or the baseline).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Survivor {
    pub key: TableKey,
    pub speedup: f64,
    pub ln_k: f64,
}

/// Sift outcome plus the trace of both phases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sifted {
    pub selected: TableKey,
    pub speedup: f64,
    pub ln_k: f64,
    pub survivors: Vec<Survivor>,
}

/// Two-phase sifting. Phase 1 keeps, per V, only the smallest M whose
/// measured speedup meets the threshold (smallest M means lowest sparsity,
/// hence highest accuracy). Phase 2 returns the survivor maximizing ln K,
/// ties broken toward the baseline, then smaller V, then smaller M.
pub fn sift(query: &SelectionQuery) -> Result<Sifted> {
    let (m_lo, m_hi) = query.m_range;
    let mut survivors: Vec<Survivor> = Vec::new();

    if m_lo <= 4 {
        if let Some(speedup) = query.table.get(&TableKey::Baseline24) {
            if speedup >= query.threshold_s {
                survivors.push(Survivor {
                    key: TableKey::Baseline24,
                    speedup,
                    ln_k: TableKey::Baseline24.ln_k(),
                });
            }
        }
    }
    for &v in &query.candidate_v {
        for m in m_lo.max(4)..=m_hi {
            let key = TableKey::Pattern { v, m };
            if let Some(speedup) = query.table.get(&key) {
                if speedup >= query.threshold_s {
                    survivors.push(Survivor {
                        key,
                        speedup,
                        ln_k: key.ln_k(),
                    });
                    break; // smallest feasible m for this v
                }
            }
        }
    }
    if survivors.is_empty() {
        return Err(VnmError::NoFeasibleCombination {
            threshold: query.threshold_s,
        });
    }
    let best = survivors
        .iter()
        .min_by(|a, b| {
            b.ln_k
                .partial_cmp(&a.ln_k)
                .expect("ln_k is finite")
                .then(a.key.rank().cmp(&b.key.rank()))
        })
        .copied()
        .expect("survivors nonempty");
    Ok(Sifted {
        selected: best.key,
        speedup: best.speedup,
        ln_k: best.ln_k,
        survivors,
    })
}
