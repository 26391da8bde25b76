//! Stage schedules for the LoRA strategies.

use crate::error::{Result, VnmError};
use serde::{Deserialize, Serialize};

/// Phase kind within a run. Dense trains with an all-true mask, Dynamic
/// recomputes the mask at fixed intervals, Fixed inherits and freezes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Dense,
    Dynamic,
    Fixed,
}

/// Half-open iteration range of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpan {
    pub stage: Stage,
    pub start: usize,
    pub end: usize,
}

impl StageSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Validate three-stage fractions: nonnegative, summing to 1, with the
/// first two stages at most 10% of the total combined.
pub fn check_fractions(fractions: (f64, f64, f64)) -> Result<()> {
    let (f1, f2, f3) = fractions;
    if f1 < 0.0 || f2 < 0.0 || f3 < 0.0 {
        return Err(VnmError::InvalidConfig(
            "stage fractions must be nonnegative".into(),
        ));
    }
    if (f1 + f2 + f3 - 1.0).abs() > 1e-6 {
        return Err(VnmError::InvalidConfig(format!(
            "stage fractions must sum to 1, got {}",
            f1 + f2 + f3
        )));
    }
    if f1 + f2 > 0.10 + 1e-9 {
        return Err(VnmError::InvalidConfig(format!(
            "the first two stages may use at most 10% of the run, got {:.1}%",
            100.0 * (f1 + f2)
        )));
    }
    Ok(())
}

/// Iterations covered by a fractional stage: floored, except that values
/// within rounding distance of an integer snap to it first (a fraction
/// like 320/12000 written as a finite decimal must still yield 320).
pub fn stage_len(fraction: f64, total_iters: usize) -> usize {
    let x = fraction * total_iters as f64;
    let nearest = x.round();
    if (x - nearest).abs() < 1e-6 {
        nearest as usize
    } else {
        x.floor() as usize
    }
}

/// Dense -> dynamic -> fixed spans covering [0, total). Stage lengths are
/// floored; the remainder goes to stage 3.
pub fn three_stage_schedule(
    total_iters: usize,
    fractions: (f64, f64, f64),
) -> Result<Vec<StageSpan>> {
    check_fractions(fractions)?;
    let s1 = stage_len(fractions.0, total_iters);
    let s2 = stage_len(fractions.1, total_iters);
    Ok(vec![
        StageSpan {
            stage: Stage::Dense,
            start: 0,
            end: s1,
        },
        StageSpan {
            stage: Stage::Dynamic,
            start: s1,
            end: s1 + s2,
        },
        StageSpan {
            stage: Stage::Fixed,
            start: s1 + s2,
            end: total_iters,
        },
    ])
}
