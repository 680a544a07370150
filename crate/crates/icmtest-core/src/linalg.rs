//! Symmetric dense linear algebra backing the ICA estimators: covariance,
//! Jacobi eigendecomposition, matrix inverse square root, whitening, and
//! joint diagonalization of several symmetric matrices.
//!
//! Everything here is deterministic: identical inputs give bit-identical
//! outputs, which is what makes the downstream tests reproducible.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::mat::Mat;
use crate::math;

/// Relative asymmetry tolerated by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues below `SPD_EPS * lambda_max` are treated as zero: the matrix
/// is declared collinear rather than silently regularized.
pub const SPD_EPS: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;
const JOINT_DIAG_ANGLE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum LinalgError {
    /// Input contains NaN or infinite entries.
    NonFinite,
    /// Fewer than two observation rows.
    TooFewRows { n: usize },
    NotSquare { nrows: usize, ncols: usize },
    /// Relative asymmetry beyond [`SYMMETRY_TOL`].
    NotSymmetric { max_asymmetry: f64 },
    /// Iteration cap reached before the off-diagonal mass vanished.
    NoConvergence { sweeps: usize },
    /// Smallest eigenvalue relative to the largest; signals collinear data.
    NotPositiveDefinite { min_eigenvalue: f64 },
    DimensionMismatch { expected: usize, got: usize },
    EmptyInput,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NonFinite => write!(f, "input contains non-finite entries"),
            LinalgError::TooFewRows { n } => write!(f, "need at least 2 rows, got {n}"),
            LinalgError::NotSquare { nrows, ncols } => {
                write!(f, "expected a square matrix, got {nrows}x{ncols}")
            }
            LinalgError::NotSymmetric { max_asymmetry } => {
                write!(f, "matrix is not symmetric (relative asymmetry {max_asymmetry:.3e})")
            }
            LinalgError::NoConvergence { sweeps } => {
                write!(f, "iteration did not converge within {sweeps} sweeps")
            }
            LinalgError::NotPositiveDefinite { min_eigenvalue } => write!(
                f,
                "matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})"
            ),
            LinalgError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            LinalgError::EmptyInput => write!(f, "empty input"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Square symmetric matrix, validated on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: Mat,
}

impl SymMatrix {
    pub fn new(m: Mat) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare {
                nrows: m.nrows(),
                ncols: m.ncols(),
            });
        }
        if !m.all_finite() {
            return Err(LinalgError::NonFinite);
        }
        let scale = math::max(m.max_abs(), f64::MIN_POSITIVE);
        let mut max_asym = 0.0;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                max_asym = math::max(max_asym, math::abs(m[(i, j)] - m[(j, i)]));
            }
        }
        if max_asym > SYMMETRY_TOL * scale {
            return Err(LinalgError::NotSymmetric {
                max_asymmetry: max_asym / scale,
            });
        }
        Ok(SymMatrix { m })
    }

    /// For matrices that are symmetric by construction.
    pub(crate) fn new_unchecked(m: Mat) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        SymMatrix { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.m
    }

    pub fn into_mat(self) -> Mat {
        self.m
    }
}

/// Eigendecomposition of a symmetric matrix: descending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

/// Centering and decorrelating transform estimated from data:
/// `x_st = inv_sqrt_cov * (x - mean)`.
#[derive(Clone, Debug)]
pub struct Whitener {
    pub mean: Vec<f64>,
    pub inv_sqrt_cov: SymMatrix,
}

impl Whitener {
    /// Applies the transform to every row of `x`.
    pub fn apply(&self, x: &Mat) -> Mat {
        let n = x.nrows();
        let p = x.ncols();
        assert_eq!(p, self.mean.len(), "whitener dimension mismatch");
        let b = self.inv_sqrt_cov.as_mat();
        let mut out = Mat::zeros(n, p);
        let mut centered = vec![0.0; p];
        for j in 0..n {
            for (c, (&v, &m)) in centered.iter_mut().zip(x.row(j).iter().zip(&self.mean)) {
                *c = v - m;
            }
            let row = out.row_mut(j);
            for i in 0..p {
                row[i] = b
                    .row(i)
                    .iter()
                    .zip(centered.iter())
                    .map(|(&a, &z)| a * z)
                    .sum();
            }
        }
        out
    }
}

/// Divisor used by the covariance estimate. The `1/n` form matches the
/// normalization of the fourth-moment and cumulant matrices downstream and
/// is the default everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovDivisor {
    N,
    NMinusOne,
}

/// Sample covariance with divisor `n`.
pub fn sample_covariance(x: &Mat) -> Result<SymMatrix, LinalgError> {
    sample_covariance_with(x, CovDivisor::N)
}

pub fn sample_covariance_with(x: &Mat, divisor: CovDivisor) -> Result<SymMatrix, LinalgError> {
    let n = x.nrows();
    let p = x.ncols();
    if !x.all_finite() {
        return Err(LinalgError::NonFinite);
    }
    if n < 2 {
        return Err(LinalgError::TooFewRows { n });
    }
    let means = x.col_means();
    let mut cov = Mat::zeros(p, p);
    let mut centered = vec![0.0; p];
    for j in 0..n {
        for (c, (&v, &m)) in centered.iter_mut().zip(x.row(j).iter().zip(&means)) {
            *c = v - m;
        }
        for a in 0..p {
            let ca = centered[a];
            for b in a..p {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    let denom = match divisor {
        CovDivisor::N => n as f64,
        CovDivisor::NMinusOne => (n - 1) as f64,
    };
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(SymMatrix::new_unchecked(cov))
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues come back descending; each eigenvector is signed so that its
/// largest-magnitude component is positive, making repeated calls on equal
/// input bit-identical.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenDecomposition, LinalgError> {
    let p = a.dim();
    let mut m = a.as_mat().clone();
    let mut v = Mat::identity(p);
    let scale = math::max(m.max_abs(), f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off = math::max(off, math::abs(m[(i, j)]));
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = m[(i, j)];
                if math::abs(apq) <= tol * 1e-2 {
                    continue;
                }
                let (c, s) = jacobi_rotation(m[(i, i)], m[(j, j)], apq);
                apply_two_sided_rotation(&mut m, i, j, c, s);
                apply_right_rotation(&mut v, i, j, c, s);
            }
        }
    }
    if !converged {
        // One more check: the sweeps may have finished the job exactly at the cap.
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off = math::max(off, math::abs(m[(i, j)]));
            }
        }
        if off > tol {
            return Err(LinalgError::NoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }
    }

    // Sort descending by eigenvalue, stable in the original column order.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| match m[(b, b)].partial_cmp(&m[(a, a)]) {
        Some(ord) => ord,
        None => core::cmp::Ordering::Equal,
    });

    let mut values = Vec::with_capacity(p);
    let mut vectors = Mat::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        values.push(m[(src, src)]);
        // Sign convention: largest-magnitude entry positive.
        let mut best = 0;
        let mut best_abs = 0.0;
        for r in 0..p {
            let a = math::abs(v[(r, src)]);
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        let flip = if v[(best, src)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..p {
            vectors[(r, dst)] = flip * v[(r, src)];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Classic two-sided Jacobi rotation parameters zeroing `a[i][j]`.
fn jacobi_rotation(aii: f64, ajj: f64, aij: f64) -> (f64, f64) {
    let tau = (ajj - aii) / (2.0 * aij);
    let t = if tau >= 0.0 {
        1.0 / (tau + math::sqrt(1.0 + tau * tau))
    } else {
        1.0 / (tau - math::sqrt(1.0 + tau * tau))
    };
    let c = 1.0 / math::sqrt(1.0 + t * t);
    (c, t * c)
}

/// `m <- G' * m * G` where `G` rotates the `(i, j)` plane.
fn apply_two_sided_rotation(m: &mut Mat, i: usize, j: usize, c: f64, s: f64) {
    let p = m.nrows();
    for k in 0..p {
        let mki = m[(k, i)];
        let mkj = m[(k, j)];
        m[(k, i)] = c * mki - s * mkj;
        m[(k, j)] = s * mki + c * mkj;
    }
    for k in 0..p {
        let mik = m[(i, k)];
        let mjk = m[(j, k)];
        m[(i, k)] = c * mik - s * mjk;
        m[(j, k)] = s * mik + c * mjk;
    }
    // Restore exact symmetry in the rotated plane.
    m[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
    m[(j, i)] = m[(i, j)];
}

/// `m <- m * G`.
fn apply_right_rotation(m: &mut Mat, i: usize, j: usize, c: f64, s: f64) {
    let p = m.nrows();
    for k in 0..p {
        let mki = m[(k, i)];
        let mkj = m[(k, j)];
        m[(k, i)] = c * mki - s * mkj;
        m[(k, j)] = s * mki + c * mkj;
    }
}

fn spd_eigen(a: &SymMatrix) -> Result<EigenDecomposition, LinalgError> {
    let eig = sym_eigen(a)?;
    let lambda_max = eig.values[0];
    let lambda_min = eig.values[eig.values.len() - 1];
    if lambda_max <= 0.0 || lambda_min <= SPD_EPS * lambda_max {
        return Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue: lambda_min,
        });
    }
    Ok(eig)
}

fn assemble_from_eigen(eig: &EigenDecomposition, f: impl Fn(f64) -> f64) -> SymMatrix {
    let p = eig.values.len();
    let mapped: Vec<f64> = eig.values.iter().map(|&l| f(l)).collect();
    let mut out = Mat::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for (k, &fk) in mapped.iter().enumerate() {
                acc += eig.vectors[(i, k)] * fk * eig.vectors[(j, k)];
            }
            out[(i, j)] = acc;
            out[(j, i)] = acc;
        }
    }
    SymMatrix::new_unchecked(out)
}

/// Inverse square root of a symmetric positive definite matrix:
/// returns `B` with `B * A * B = I`.
pub fn inverse_sqrt(a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let eig = spd_eigen(a)?;
    Ok(assemble_from_eigen(&eig, |l| 1.0 / math::sqrt(l)))
}

/// Symmetric positive definite square root, the inverse transform of
/// [`inverse_sqrt`].
pub fn sym_sqrt(a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let eig = spd_eigen(a)?;
    Ok(assemble_from_eigen(&eig, math::sqrt))
}

/// Centers and decorrelates the rows of `x`; the returned matrix has zero
/// column means and sample covariance equal to the identity.
pub fn whiten(x: &Mat) -> Result<(Whitener, Mat), LinalgError> {
    let cov = sample_covariance(x)?;
    let inv_sqrt_cov = inverse_sqrt(&cov)?;
    let whitener = Whitener {
        mean: x.col_means(),
        inv_sqrt_cov,
    };
    let xst = whitener.apply(x);
    Ok((whitener, xst))
}

/// Result of [`joint_diagonalize`]: the orthogonal matrix, whether the sweep
/// limit was hit, and the residual off-diagonal mass.
#[derive(Clone, Debug)]
pub struct JointDiagResult {
    /// Orthogonal matrix whose columns jointly diagonalize the inputs.
    pub rotation: Mat,
    pub converged: bool,
    pub sweeps: usize,
    /// Sum over matrices of squared off-diagonal entries of `V' * M * V`.
    pub off_diagonal: f64,
}

/// Joint approximate diagonalization of symmetric matrices by Jacobi
/// rotations, maximizing the summed squared diagonals.
///
/// Sweeps run over lexicographic `(i, j)` pairs with the closed-form optimal
/// Givens angle per pair; the objective is non-decreasing across rotations.
/// Stops when the largest rotation sine in a sweep drops below `1e-12` or
/// after 100 sweeps, returning the last iterate with `converged = false` in
/// the latter case.
pub fn joint_diagonalize(ms: &[SymMatrix]) -> Result<JointDiagResult, LinalgError> {
    if ms.is_empty() {
        return Err(LinalgError::EmptyInput);
    }
    let p = ms[0].dim();
    for m in ms {
        if m.dim() != p {
            return Err(LinalgError::DimensionMismatch {
                expected: p,
                got: m.dim(),
            });
        }
    }
    let mut work: Vec<Mat> = ms.iter().map(|m| m.as_mat().clone()).collect();
    let mut v = Mat::identity(p);

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        let mut max_sin = 0.0_f64;
        for i in 0..p {
            for j in (i + 1)..p {
                // Closed-form angle for the summed squared-diagonal criterion.
                let mut g11 = 0.0;
                let mut g12 = 0.0;
                let mut g22 = 0.0;
                for m in &work {
                    let h1 = m[(i, i)] - m[(j, j)];
                    let h2 = m[(i, j)] + m[(j, i)];
                    g11 += h1 * h1;
                    g12 += h1 * h2;
                    g22 += h2 * h2;
                }
                let ton = g11 - g22;
                let toff = 2.0 * g12;
                let theta = 0.5 * libm::atan2(toff, ton + math::hypot(ton, toff));
                let c = math::cos(theta);
                // The closed-form angle is derived for the opposite rotation
                // orientation from the eigensolver's.
                let s = -math::sin(theta);
                max_sin = math::max(max_sin, math::abs(s));
                if s == 0.0 {
                    continue;
                }
                for m in &mut work {
                    apply_two_sided_rotation(m, i, j, c, s);
                }
                apply_right_rotation(&mut v, i, j, c, s);
            }
        }
        if max_sin < JOINT_DIAG_ANGLE_TOL {
            converged = true;
            break;
        }
    }

    let mut off = 0.0;
    for m in &work {
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
        }
    }
    Ok(JointDiagResult {
        rotation: v,
        converged,
        sweeps,
        off_diagonal: off,
    })
}

/// Objective maximized by [`joint_diagonalize`], exposed for its
/// monotonicity property tests.
pub fn joint_diag_objective(ms: &[SymMatrix], v: &Mat) -> f64 {
    let mut total = 0.0;
    for m in ms {
        let t = v.transpose().matmul(m.as_mat()).matmul(v);
        for i in 0..t.nrows() {
            total += t[(i, i)] * t[(i, i)];
        }
    }
    total
}
