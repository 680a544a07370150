//! Distance covariance and the total-independence aggregate built from it.

use alloc::vec;

use crate::mat::Mat;
use crate::math;
use crate::stats::StatsError;

fn row_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    math::sqrt(acc)
}

/// Squared empirical distance covariance between the rows of `xi` and `eta`:
///
/// ```text
/// (1/n^2) sum_{j,k} |xi_jk||eta_jk|
///   + (1/n^2) sum |xi_jk| * (1/n^2) sum |eta_jk|
///   - (2/n^3) sum_j sum_{k,l} |xi_jk||eta_jl|
/// ```
///
/// computed in `O(n^2 (a + b))` from one pass over pairs, with row sums of
/// the two distance matrices carrying the third term.
pub fn dcov_pair(xi: &Mat, eta: &Mat) -> Result<f64, StatsError> {
    let n = xi.nrows();
    if eta.nrows() != n {
        return Err(StatsError::DimensionMismatch {
            expected: n,
            got: eta.nrows(),
        });
    }
    if n < 2 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let mut cross = 0.0;
    let mut xi_rows = vec![0.0f64; n];
    let mut eta_rows = vec![0.0f64; n];
    for j in 0..n {
        for k in (j + 1)..n {
            let dx = row_distance(xi.row(j), xi.row(k));
            let de = row_distance(eta.row(j), eta.row(k));
            cross += 2.0 * dx * de;
            xi_rows[j] += dx;
            xi_rows[k] += dx;
            eta_rows[j] += de;
            eta_rows[k] += de;
        }
    }
    let xi_total: f64 = xi_rows.iter().sum();
    let eta_total: f64 = eta_rows.iter().sum();
    let term1 = cross / (nf * nf);
    let term2 = (xi_total / (nf * nf)) * (eta_total / (nf * nf));
    let mut rowprod = 0.0;
    for j in 0..n {
        rowprod += xi_rows[j] * eta_rows[j];
    }
    let term3 = 2.0 * rowprod / (nf * nf * nf);
    Ok(math::max(term1 + term2 - term3, 0.0))
}

/// Aggregate distance-covariance statistic for total independence:
/// `n` times the sum over components of the distance covariance between the
/// component and the remaining ones.
pub fn dc_statistic(z: &Mat) -> f64 {
    let n = z.nrows();
    let p = z.ncols();
    if n < 2 || p < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for l in 0..(p - 1) {
        let xi = Mat::from_vec(n, 1, z.col(l));
        let mut rest = Mat::zeros(n, p - 1);
        for j in 0..n {
            let mut c = 0;
            for m in 0..p {
                if m != l {
                    rest[(j, c)] = z[(j, m)];
                    c += 1;
                }
            }
        }
        total += dcov_pair(&xi, &rest).expect("row counts match by construction");
    }
    n as f64 * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, RngStream};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_points_hand_expansion() {
        let xi = Mat::from_rows(&[&[0.0, 0.0], &[3.0, 4.0]]);
        let eta = Mat::from_rows(&[&[1.0], &[-1.0]]);
        // |xi_12| = 5, |eta_12| = 2 -> 5 * 2 / 4.
        assert_abs_diff_eq!(dcov_pair(&xi, &eta).unwrap(), 2.5, epsilon = 1e-14);
    }

    #[test]
    fn constant_block_gives_zero() {
        let xi = Mat::from_rows(&[&[1.0], &[1.0], &[1.0]]);
        let eta = Mat::from_rows(&[&[0.3], &[-0.7], &[2.0]]);
        assert_eq!(dcov_pair(&xi, &eta).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_rows_error() {
        let xi = Mat::zeros(3, 1);
        let eta = Mat::zeros(4, 1);
        assert!(matches!(
            dcov_pair(&xi, &eta),
            Err(StatsError::DimensionMismatch { expected: 3, got: 4 })
        ));
    }

    /// Oracle: literal O(n^3) transcription of the three sums.
    fn dcov_naive(xi: &Mat, eta: &Mat) -> f64 {
        let n = xi.nrows();
        let nf = n as f64;
        let d = |m: &Mat, j: usize, k: usize| row_distance(m.row(j), m.row(k));
        let mut t1 = 0.0;
        let mut sx = 0.0;
        let mut se = 0.0;
        for j in 0..n {
            for k in 0..n {
                t1 += d(xi, j, k) * d(eta, j, k);
                sx += d(xi, j, k);
                se += d(eta, j, k);
            }
        }
        let mut t3 = 0.0;
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    t3 += d(xi, j, k) * d(eta, j, l);
                }
            }
        }
        t1 / (nf * nf) + (sx / (nf * nf)) * (se / (nf * nf)) - 2.0 * t3 / (nf * nf * nf)
    }

    #[test]
    fn matches_cubic_transcription() {
        let mut rng = RngStream::from_seed(8).rng();
        for trial in 0..10 {
            let n = 4 + trial;
            let mut xd = alloc::vec::Vec::new();
            let mut ed = alloc::vec::Vec::new();
            for _ in 0..n {
                xd.push(standard_normal(&mut rng));
                xd.push(standard_normal(&mut rng));
                ed.push(standard_normal(&mut rng));
            }
            let xi = Mat::from_vec(n, 2, xd);
            let eta = Mat::from_vec(n, 1, ed);
            let fast = dcov_pair(&xi, &eta).unwrap();
            let slow = dcov_naive(&xi, &eta);
            assert_abs_diff_eq!(fast, slow, epsilon = 1e-12);
        }
    }

    #[test]
    fn dc_statistic_decomposes_into_pairs() {
        let mut rng = RngStream::from_seed(9).rng();
        let n = 7;
        let mut data = alloc::vec::Vec::new();
        for _ in 0..n * 3 {
            data.push(standard_normal(&mut rng));
        }
        let z = Mat::from_vec(n, 3, data);
        let total = dc_statistic(&z);
        let mut manual = 0.0;
        for l in 0..2 {
            let xi = Mat::from_vec(n, 1, z.col(l));
            let mut rest = Mat::zeros(n, 2);
            for j in 0..n {
                let mut c = 0;
                for m in 0..3 {
                    if m != l {
                        rest[(j, c)] = z[(j, m)];
                        c += 1;
                    }
                }
            }
            manual += dcov_pair(&xi, &rest).unwrap();
        }
        assert_eq!(total, n as f64 * manual);
    }

    #[test]
    fn degenerate_sizes_are_zero() {
        assert_eq!(dc_statistic(&Mat::from_rows(&[&[1.0, 2.0]])), 0.0);
        let z = Mat::from_rows(&[&[1.0, 2.0], &[0.5, -1.0]]);
        // p = 2 reduces to the single pair term.
        let xi = Mat::from_vec(2, 1, z.col(0));
        let eta = Mat::from_vec(2, 1, z.col(1));
        assert_eq!(dc_statistic(&z), 2.0 * dcov_pair(&xi, &eta).unwrap());
    }
}
