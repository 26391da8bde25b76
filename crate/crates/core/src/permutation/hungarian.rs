//! Exact linear sum assignment (Hungarian algorithm, O(n³)).
//!
//! Shortest-augmenting-path formulation with dual potentials, adapted to
//! real-valued costs. One virtual column (index 0 internally) hosts the
//! row being inserted on each phase.

use crate::error::{Result, VnmError};

/// Square cost matrix for an assignment of channels to slots.
#[derive(Debug, Clone, PartialEq)]
pub struct LsaCost {
    n: usize,
    cost: Vec<f64>,
}

impl LsaCost {
    pub fn new(n: usize, cost: Vec<f64>) -> Result<Self> {
        if cost.len() != n * n {
            return Err(VnmError::LengthMismatch {
                what: "assignment cost matrix",
                expected: n * n,
                actual: cost.len(),
            });
        }
        if let Some(idx) = cost.iter().position(|c| !c.is_finite()) {
            return Err(VnmError::NonFinite {
                what: "assignment cost matrix",
                index: idx,
            });
        }
        Ok(Self { n, cost })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cost[row * self.n + col]
    }
}

/// Minimum-cost assignment; `result[row] = col`, exact optimum.
pub fn hungarian_minimize(cost: &LsaCost) -> Vec<usize> {
    let n = cost.n();
    if n == 0 {
        return Vec::new();
    }
    // 1-indexed rows/columns; p[0] is the virtual column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row matched to column j
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Maximum-total assignment; `result[row] = col`, exact optimum.
pub fn hungarian_maximize(cost: &LsaCost) -> Vec<usize> {
    let negated = LsaCost {
        n: cost.n,
        cost: cost.cost.iter().map(|c| -c).collect(),
    };
    hungarian_minimize(&negated)
}

/// Total cost of an assignment.
pub fn assignment_total(cost: &LsaCost, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(row, &col)| cost.get(row, col))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_max(cost: &LsaCost) -> f64 {
        fn rec(cost: &LsaCost, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let n = cost.n();
            if row == n {
                *best = best.max(acc);
                return;
            }
            for col in 0..n {
                if !used[col] {
                    used[col] = true;
                    rec(cost, row + 1, used, acc + cost.get(row, col), best);
                    used[col] = false;
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        let mut used = vec![false; cost.n()];
        rec(cost, 0, &mut used, 0.0, &mut best);
        best
    }

    #[test]
    fn identity_cost_maximizes_on_diagonal() {
        let n = 4;
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            c[i * n + i] = 1.0;
        }
        let cost = LsaCost::new(n, c).unwrap();
        let assignment = hungarian_maximize(&cost);
        assert_eq!(assignment, vec![0, 1, 2, 3]);
        assert_eq!(assignment_total(&cost, &assignment), n as f64);
    }

    #[test]
    fn three_by_three_known_optimum() {
        let cost = LsaCost::new(3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 1.0, 3.0, 1.0, 2.0]).unwrap();
        let assignment = hungarian_maximize(&cost);
        assert_eq!(assignment, vec![2, 1, 0]);
        assert_eq!(assignment_total(&cost, &assignment), 10.0);
    }

    #[test]
    fn all_equal_costs_yield_any_bijection() {
        let cost = LsaCost::new(5, vec![2.5; 25]).unwrap();
        let assignment = hungarian_maximize(&cost);
        let mut seen = [false; 5];
        for &col in &assignment {
            assert!(!seen[col]);
            seen[col] = true;
        }
        assert_eq!(assignment_total(&cost, &assignment), 12.5);
    }

    #[test]
    fn matches_brute_force_on_small_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for n in 1..=6 {
            for _ in 0..40 {
                let c: Vec<f64> = (0..n * n).map(|_| rng.random_range(-5.0..5.0)).collect();
                let cost = LsaCost::new(n, c).unwrap();
                let got = assignment_total(&cost, &hungarian_maximize(&cost));
                let want = brute_force_max(&cost);
                assert!(
                    (got - want).abs() < 1e-9,
                    "n={n}: hungarian {got} vs brute force {want}"
                );
            }
        }
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            LsaCost::new(2, vec![1.0, 2.0, 3.0]),
            Err(VnmError::LengthMismatch { .. })
        ));
    }
}
