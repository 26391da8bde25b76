//! Fixed-vs-dynamic gradient-norm comparison.

use crate::error::{Result, VnmError};
use crate::train::TrainRun;
use serde::{Deserialize, Serialize};

/// Windowed comparison of two runs' gradient norms. The fraction counts
/// windows where the dynamic run's mean is lower; ties count one half.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradNormReport {
    pub window: usize,
    pub per_iter: Vec<(f32, f32)>,
    pub fixed_window_means: Vec<f64>,
    pub dynamic_window_means: Vec<f64>,
    pub fraction_dynamic_lower: f64,
}

pub fn grad_norm_report(
    run_fixed: &TrainRun,
    run_dynamic: &TrainRun,
    window: usize,
) -> Result<GradNormReport> {
    if run_fixed.grad_norm.len() != run_dynamic.grad_norm.len() {
        return Err(VnmError::LengthMismatch {
            what: "grad-norm logs",
            expected: run_fixed.grad_norm.len(),
            actual: run_dynamic.grad_norm.len(),
        });
    }
    if run_fixed.grad_norm.is_empty() {
        return Err(VnmError::InvalidConfig(
            "grad-norm report needs nonempty logs".into(),
        ));
    }
    let window = window.max(1);
    let mean = |chunk: &[f32]| chunk.iter().map(|&x| x as f64).sum::<f64>() / chunk.len() as f64;
    let fixed_window_means: Vec<f64> = run_fixed.grad_norm.chunks(window).map(mean).collect();
    let dynamic_window_means: Vec<f64> = run_dynamic.grad_norm.chunks(window).map(mean).collect();
    let mut score = 0.0;
    for (f, d) in fixed_window_means.iter().zip(dynamic_window_means.iter()) {
        score += if d < f {
            1.0
        } else if d > f {
            0.0
        } else {
            0.5
        };
    }
    let per_iter = run_fixed
        .grad_norm
        .iter()
        .zip(run_dynamic.grad_norm.iter())
        .map(|(&f, &d)| (f, d))
        .collect();
    Ok(GradNormReport {
        window,
        per_iter,
        fraction_dynamic_lower: score / fixed_window_means.len() as f64,
        fixed_window_means,
        dynamic_window_means,
    })
}
