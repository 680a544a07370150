//! The characteristic-function L2 statistic in closed form.
//!
//! With a product weight whose per-coordinate CF is `C`, the weighted L2
//! contrast between the joint empirical CF of the rows of `z` and the product
//! of the marginal empirical CFs collapses to three sums over pairwise
//! differences:
//!
//! ```text
//! T = (1/n)      sum_{j,k} prod_l C(z_{jl} - z_{kl})
//!   + (1/n^{2p-1}) prod_l  sum_{j,k} C(z_{jl} - z_{kl})
//!   - (2/n^p)    sum_j  prod_l sum_k C(z_{jl} - z_{kl})
//! ```
//!
//! evaluated here in `O(n^2 p)` with the per-column pairwise kernel sums
//! shared across the three terms.

use alloc::vec;
use alloc::vec::Vec;

use crate::mat::Mat;
use crate::math;
use crate::stats::{self, ScoreSpec, StatsError, WeightKernel, WeightKind};

/// Closed-form CF statistic on the rows of `z`. Non-negative by
/// construction; round-off below zero is clamped.
pub fn t_statistic(z: &Mat, w: &WeightKernel) -> f64 {
    let n = z.nrows();
    let p = z.ncols();
    if n == 0 {
        return 0.0;
    }
    // Diagonal pairs contribute prod_l C(0) = 1 each.
    let mut pair_sum = n as f64;
    let mut rowsums = vec![vec![1.0f64; n]; p];
    let mut kvals = vec![0.0f64; p];
    for j in 0..n {
        let zj = z.row(j);
        for k in (j + 1)..n {
            let zk = z.row(k);
            let mut prod = 1.0;
            for (l, (&a, &b)) in zj.iter().zip(zk.iter()).enumerate() {
                let c = w.eval(a - b);
                kvals[l] = c;
                prod *= c;
            }
            pair_sum += 2.0 * prod;
            for (l, &c) in kvals.iter().enumerate() {
                rowsums[l][j] += c;
                rowsums[l][k] += c;
            }
        }
    }
    assemble_cf_terms(n, p, pair_sum, &rowsums)
}

pub(crate) fn assemble_cf_terms(n: usize, p: usize, pair_sum: f64, rowsums: &[Vec<f64>]) -> f64 {
    let nf = n as f64;
    let term1 = pair_sum / nf;
    let mut term2 = 1.0;
    for rs in rowsums {
        term2 *= rs.iter().sum::<f64>();
    }
    term2 /= stats::ipow(nf, 2 * p - 1);
    let mut cross = 0.0;
    for j in 0..n {
        let mut prod = 1.0;
        for rs in rowsums {
            prod *= rs[j];
        }
        cross += prod;
    }
    let term3 = 2.0 * cross / stats::ipow(nf, p);
    math::max(term1 + term2 - term3, 0.0)
}

/// CF statistic of the scored ranks of `z`.
///
/// Panics if `score` is [`ScoreSpec::Raw`]; rank statistics need an actual
/// score function.
pub fn t_statistic_rank(z: &Mat, score: ScoreSpec, w: &WeightKernel) -> f64 {
    assert!(score != ScoreSpec::Raw, "rank statistic requires a score function");
    let scored = stats::apply_scores(&stats::column_ranks(z), score, z.nrows());
    t_statistic(&scored, w)
}

/// Van der Waerden scored-rank empirical CF contrasted against the standard
/// normal CF `exp(-||t||^2 / 2)` instead of the product of empirical
/// marginals, integrated against a Gaussian weight.
///
/// All three integrals are Gaussian and close over each coordinate:
/// the pairwise kernel term, a pointwise cross term with per-coordinate
/// factor `(2 gamma + 1)^{-1/2} exp(-gamma s^2 / (2 gamma + 1))`, and the
/// constant `n (4 gamma + 1)^{-p/2}`.
pub fn t_statistic_vdw_reference(z: &Mat, w: &WeightKernel) -> Result<f64, StatsError> {
    if w.kind != WeightKind::Gaussian {
        return Err(StatsError::NonGaussianWeight);
    }
    let n = z.nrows();
    let p = z.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let scored = stats::apply_scores(&stats::column_ranks(z), ScoreSpec::VanDerWaerden, n);
    let (pair_sum, cross_sum) = vdw_sums(&scored, w);
    Ok(assemble_vdw_terms(n, p, w.gamma, pair_sum, cross_sum))
}

/// Pairwise kernel sum and the pointwise reference cross sum on an already
/// scored matrix.
pub(crate) fn vdw_sums(scored: &Mat, w: &WeightKernel) -> (f64, Vec<f64>) {
    let n = scored.nrows();
    let p = scored.ncols();
    let mut pair_sum = n as f64;
    for j in 0..n {
        let sj = scored.row(j);
        for k in (j + 1)..n {
            let sk = scored.row(k);
            let mut prod = 1.0;
            for (&a, &b) in sj.iter().zip(sk.iter()) {
                prod *= w.eval(a - b);
            }
            pair_sum += 2.0 * prod;
        }
    }
    let mut cross = vec![0.0f64; n * p];
    let shrink = w.gamma / (2.0 * w.gamma + 1.0);
    let scale = 1.0 / math::sqrt(2.0 * w.gamma + 1.0);
    for j in 0..n {
        for (l, &s) in scored.row(j).iter().enumerate() {
            cross[j * p + l] = scale * math::exp(-shrink * s * s);
        }
    }
    (pair_sum, cross)
}

pub(crate) fn assemble_vdw_terms(
    n: usize,
    p: usize,
    gamma: f64,
    pair_sum: f64,
    cross: Vec<f64>,
) -> f64 {
    let nf = n as f64;
    let term_a = pair_sum / nf;
    let mut term_b = 0.0;
    for j in 0..n {
        let mut prod = 1.0;
        for l in 0..p {
            prod *= cross[j * p + l];
        }
        term_b += prod;
    }
    let term_c = nf * math::powf(4.0 * gamma + 1.0, -(p as f64) / 2.0);
    math::max(term_a - 2.0 * term_b + term_c, 0.0)
}
