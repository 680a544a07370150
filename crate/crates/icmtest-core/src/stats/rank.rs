//! Columnwise ranks and score transforms.

use alloc::vec;
use alloc::vec::Vec;

use crate::mat::Mat;
use crate::stats::ScoreSpec;

/// Ranks `1..=n` within each column; exact ties keep their original row
/// order, so the result is deterministic for any float input.
pub fn column_ranks(z: &Mat) -> Vec<Vec<usize>> {
    let n = z.nrows();
    let p = z.ncols();
    let mut ranks = vec![vec![0usize; n]; p];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for (l, col_ranks) in ranks.iter_mut().enumerate() {
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| {
            z[(a, l)]
                .partial_cmp(&z[(b, l)])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for (pos, &row) in order.iter().enumerate() {
            col_ranks[row] = pos + 1;
        }
    }
    ranks
}

/// Maps ranks to scores `J(r / (n + 1))`, producing an `n x p` matrix.
pub fn apply_scores(ranks: &[Vec<usize>], score: ScoreSpec, n: usize) -> Mat {
    let p = ranks.len();
    let mut out = Mat::zeros(n, p);
    let denom = (n + 1) as f64;
    // Scores depend on the rank only; compute each once.
    let table: Vec<f64> = (1..=n).map(|r| score.apply(r as f64 / denom)).collect();
    for (l, col_ranks) in ranks.iter().enumerate() {
        for (j, &r) in col_ranks.iter().enumerate() {
            out[(j, l)] = table[r - 1];
        }
    }
    out
}
