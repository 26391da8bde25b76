//! Exhaustive-enumeration oracles for the three-step pruner.
//!
//! For small blocks the optimal column quadruple and per-row pair can be
//! found by brute force over C(m,4) and C(4,2) subsets; the greedy pruner
//! must match those optima exactly (ties resolved toward smaller indices,
//! i.e. the lexicographically smallest maximizer).

use vnm_core::importance::ImportanceMatrix;
use vnm_core::pattern::VnmPattern;
use vnm_core::pruner::prune_vnm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    'outer: loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            if idx[i] < i + n - k {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                continue 'outer;
            }
        }
    }
    out
}

/// Lexicographically smallest max-sum subset of size k.
fn best_subset(values: &[f64], k: usize) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for combo in combinations(values.len(), k) {
        let sum: f64 = combo.iter().map(|&i| values[i]).sum();
        match &best {
            Some((best_sum, _)) if sum <= *best_sum => {}
            _ => best = Some((sum, combo)),
        }
    }
    best.expect("nonempty").1
}

#[test]
fn column_and_row_choices_match_exhaustive_optima() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = 0;
    while cases < 200 {
        let v = rng.random_range(1..=4usize);
        let m = rng.random_range(4..=8usize);
        let scores_raw: Vec<f32> = (0..v * m).map(|_| rng.random_range(0.0..10.0f32)).collect();
        let scores = ImportanceMatrix::from_vec(v, m, scores_raw.clone()).unwrap();
        let pattern = VnmPattern::new(v, m).unwrap();
        let mask = prune_vnm(&scores, &pattern).unwrap();

        // column step: quadruple maximizes the sum of column L1 norms
        let col_l1: Vec<f64> = (0..m)
            .map(|j| (0..v).map(|i| scores_raw[i * m + j] as f64).sum())
            .collect();
        let want_cols = best_subset(&col_l1, 4);
        let got_cols: Vec<usize> = mask
            .retained_for(0, 0)
            .iter()
            .map(|&c| c as usize)
            .collect();
        assert_eq!(got_cols, want_cols, "v={v} m={m} col_l1={col_l1:?}");

        // row step: kept pair maximizes the within-row retained score
        for i in 0..v {
            let quad_scores: Vec<f64> = want_cols
                .iter()
                .map(|&j| scores_raw[i * m + j] as f64)
                .collect();
            let want_pair: Vec<usize> = best_subset(&quad_scores, 2)
                .iter()
                .map(|&p| want_cols[p])
                .collect();
            let got_pair: Vec<usize> = (0..m).filter(|&j| mask.get(i, j)).collect();
            assert_eq!(got_pair, want_pair, "v={v} m={m} row {i}");
        }
        cases += 1;
    }
}

#[test]
fn exhaustive_singleton_block_example() {
    // [5,4,3,2,1], v=1, m=5: all C(5,4)*C(4,2) choices enumerated confirm
    // the greedy pick {0,1}.
    let scores = ImportanceMatrix::from_vec(1, 5, vec![5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
    let mask = prune_vnm(&scores, &VnmPattern::new(1, 5).unwrap()).unwrap();
    let mut best_pair = (f64::MIN, Vec::new());
    for cols in combinations(5, 4) {
        for pair in combinations(4, 2) {
            let sum: f64 = pair.iter().map(|&p| scores.get(0, cols[p]) as f64).sum();
            if sum > best_pair.0 {
                best_pair = (sum, pair.iter().map(|&p| cols[p]).collect());
            }
        }
    }
    let got: Vec<usize> = (0..5).filter(|&j| mask.get(0, j)).collect();
    assert_eq!(got, best_pair.1);
    assert_eq!(got, vec![0, 1]);
}
