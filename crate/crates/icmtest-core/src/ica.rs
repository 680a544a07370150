//! Unmixing estimators: FOBI, JADE, and symmetric FastICA, plus residual
//! extraction under the `Cov(Z) = I` scale convention.
//!
//! All three estimators whiten first and then search for an orthogonal
//! factor, so every estimate decomposes as `unmixing = R * Cov^{-1/2}` with
//! `R` orthogonal. Rows are ordered by descending excess kurtosis of the
//! resulting components and signed so the largest-magnitude entry of each
//! row is positive; the statistics downstream are invariant to both choices,
//! the conventions only make runs reproducible.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{
    self, inverse_sqrt, sample_covariance, sym_eigen, sym_sqrt, LinalgError, SymMatrix, Whitener,
};
use crate::mat::Mat;
use crate::math;
use crate::rng::{self, RngStream};

/// Non-Gaussianity contrast for FastICA, named after its derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GFunc {
    /// `G(x) = (x^4 - 3) / 4`, `g(x) = x^3`.
    Pow3,
    /// `G(x) = log cosh x - c_t`, `g(x) = tanh x`.
    Tanh,
}

/// `E[log cosh Y]` for standard normal `Y`, the centering constant of the
/// tanh contrast.
pub const TANH_CENTERING: f64 = 0.37457806551731626;

impl GFunc {
    /// The centered contrast itself (not used by the fixed-point updates,
    /// which only need `g` and `g'`).
    pub fn objective(&self, x: f64) -> f64 {
        match self {
            GFunc::Pow3 => (x * x * x * x - 3.0) / 4.0,
            GFunc::Tanh => math::ln(math::cosh(x)) - TANH_CENTERING,
        }
    }

    #[inline]
    fn g(&self, x: f64) -> f64 {
        match self {
            GFunc::Pow3 => x * x * x,
            GFunc::Tanh => math::tanh(x),
        }
    }

    #[inline]
    fn g_prime(&self, x: f64) -> f64 {
        match self {
            GFunc::Pow3 => 3.0 * x * x,
            GFunc::Tanh => {
                let t = math::tanh(x);
                1.0 - t * t
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IcaMethod {
    Fobi,
    Jade,
    FastIca(GFunc),
}

impl fmt::Display for IcaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IcaMethod::Fobi => write!(f, "fobi"),
            IcaMethod::Jade => write!(f, "jade"),
            IcaMethod::FastIca(GFunc::Pow3) => write!(f, "fastica-pow3"),
            IcaMethod::FastIca(GFunc::Tanh) => write!(f, "fastica-tanh"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FastIcaParams {
    pub tol: f64,
    pub max_iter: usize,
    /// Restarts from seeded random orthogonal matrices after a failed pass
    /// (the first pass always starts from the identity).
    pub restarts: usize,
}

impl Default for FastIcaParams {
    fn default() -> Self {
        FastIcaParams {
            tol: 1e-6,
            max_iter: 1000,
            restarts: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IcaError {
    /// Estimation needs more observations than coordinates.
    TooFewRows { n: usize, p: usize },
    DimensionMismatch { expected: usize, got: usize },
    Linalg(LinalgError),
}

impl fmt::Display for IcaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IcaError::TooFewRows { n, p } => {
                write!(f, "need n > p observations, got n = {n}, p = {p}")
            }
            IcaError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected} columns, got {got}")
            }
            IcaError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for IcaError {}

impl From<LinalgError> for IcaError {
    fn from(e: LinalgError) -> Self {
        IcaError::Linalg(e)
    }
}

/// An estimated unmixing matrix with its provenance and diagnostics.
#[derive(Clone, Debug)]
pub struct UnmixingEstimate {
    /// `p x p` unmixing matrix, rows ordered and signed per the conventions.
    pub unmixing: Mat,
    /// Its inverse `Cov^{1/2} * R'`, the estimated mixing matrix.
    pub mixing: Mat,
    pub method: IcaMethod,
    pub converged: bool,
    pub iterations: usize,
    /// FOBI only: two fourth-moment eigenvalues were closer than `1e-8`,
    /// so the component order is not well identified.
    pub degenerate_kurtosis: bool,
    pub whitener: Whitener,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualSource {
    RawResiduals,
    ScoredRanks,
}

/// Estimated residuals `z_j = unmixing * (x_j - mean)`; under the scale
/// convention each column has sample variance one.
#[derive(Clone, Debug)]
pub struct ResidualMatrix {
    pub values: Mat,
    pub source: ResidualSource,
}

struct Prepared {
    whitener: Whitener,
    xst: Mat,
    sqrt_cov: SymMatrix,
}

fn prepare(x: &Mat) -> Result<Prepared, IcaError> {
    let (n, p) = (x.nrows(), x.ncols());
    if p < 2 || n <= p {
        return Err(IcaError::TooFewRows { n, p });
    }
    let cov = sample_covariance(x)?;
    let inv_sqrt_cov = inverse_sqrt(&cov)?;
    let sqrt_cov = sym_sqrt(&cov)?;
    let whitener = Whitener {
        mean: x.col_means(),
        inv_sqrt_cov,
    };
    let xst = whitener.apply(x);
    Ok(Prepared {
        whitener,
        xst,
        sqrt_cov,
    })
}

/// Matrix of fourth moments of whitened rows:
/// `(1 / (p + 2)) * (1 / n) * sum_j ||x_j||^2 x_j x_j'`.
pub fn fourth_moment_matrix(xst: &Mat) -> SymMatrix {
    let (n, p) = (xst.nrows(), xst.ncols());
    let mut m = Mat::zeros(p, p);
    for j in 0..n {
        let row = xst.row(j);
        let norm2: f64 = row.iter().map(|&v| v * v).sum();
        for a in 0..p {
            let w = norm2 * row[a];
            for b in a..p {
                m[(a, b)] += w * row[b];
            }
        }
    }
    let scale = 1.0 / ((p + 2) as f64 * n as f64);
    for a in 0..p {
        for b in a..p {
            let v = m[(a, b)] * scale;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    SymMatrix::new(m).expect("symmetric by construction")
}

/// The `p (p + 1) / 2` fourth-order cumulant matrices of whitened rows,
/// `C^{kl} = (1/n) sum_j x_{jk} x_{jl} x_j x_j' - E^{kl} - E^{lk} - d_{kl} I`
/// for `k <= l`.
pub fn cumulant_matrices(xst: &Mat) -> Vec<SymMatrix> {
    let (n, p) = (xst.nrows(), xst.ncols());
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|k| (k..p).map(move |l| (k, l)))
        .collect();
    let mut mats: Vec<Mat> = pairs.iter().map(|_| Mat::zeros(p, p)).collect();
    for j in 0..n {
        let row = xst.row(j);
        for (idx, &(k, l)) in pairs.iter().enumerate() {
            let w = row[k] * row[l];
            let m = &mut mats[idx];
            for a in 0..p {
                let wa = w * row[a];
                for b in a..p {
                    m[(a, b)] += wa * row[b];
                }
            }
        }
    }
    let nf = n as f64;
    pairs
        .iter()
        .zip(mats)
        .map(|(&(k, l), mut m)| {
            for a in 0..p {
                for b in a..p {
                    let mut v = m[(a, b)] / nf;
                    // Subtract E^{kl} + E^{lk} + d_{kl} I restricted to the
                    // upper triangle.
                    if (a, b) == (k, l) || (a, b) == (l, k) {
                        v -= if k == l { 2.0 } else { 1.0 };
                    }
                    if a == b && k == l {
                        v -= 1.0;
                    }
                    m[(a, b)] = v;
                    m[(b, a)] = v;
                }
            }
            SymMatrix::new(m).expect("symmetric by construction")
        })
        .collect()
}

/// FOBI: the orthogonal factor is the eigenvector basis of the fourth-moment
/// matrix. Well identified only when component kurtoses are distinct; near
/// ties raise `degenerate_kurtosis`.
pub fn fobi(x: &Mat) -> Result<UnmixingEstimate, IcaError> {
    let prep = prepare(x)?;
    let cov4 = fourth_moment_matrix(&prep.xst);
    let eig = sym_eigen(&cov4)?;
    // Exact ties are degenerate; so are gaps below the sampling noise of the
    // fourth-moment matrix (about 2 / sqrt(n) for its eigenvalues), since
    // the component ordering then carries no information.
    let gap_floor = math::max(1e-8, 3.0 / math::sqrt(x.nrows() as f64));
    let mut degenerate = false;
    for w in eig.values.windows(2) {
        if math::abs(w[0] - w[1]) < gap_floor {
            degenerate = true;
        }
    }
    // Rows of R are the eigenvectors.
    let r = eig.vectors.transpose();
    finalize(prep, r, IcaMethod::Fobi, true, 1, degenerate)
}

/// JADE: joint diagonalization of the fourth-order cumulant matrices.
///
/// `C^{kl}` equals `C^{lk}`, so the full square family weights each
/// off-diagonal pair twice; scaling those matrices by `sqrt(2)` reproduces
/// that weighting from the triangular family and is what makes the fitted
/// rotation exactly affine-equivariant.
pub fn jade(x: &Mat) -> Result<UnmixingEstimate, IcaError> {
    let prep = prepare(x)?;
    let p = x.ncols();
    let mut cumulants = cumulant_matrices(&prep.xst);
    let mut idx = 0;
    for k in 0..p {
        for l in k..p {
            if k != l {
                let mut m = cumulants[idx].as_mat().clone();
                let w = math::sqrt(2.0);
                for a in 0..p {
                    for b in 0..p {
                        m[(a, b)] *= w;
                    }
                }
                cumulants[idx] = SymMatrix::new(m).expect("scaling preserves symmetry");
            }
            idx += 1;
        }
    }
    let jd = linalg::joint_diagonalize(&cumulants)?;
    let r = jd.rotation.transpose();
    finalize(prep, r, IcaMethod::Jade, jd.converged, jd.sweeps, false)
}

/// Symmetric FastICA with the given contrast, deterministic for a fixed
/// seed. Starts from the identity; failed passes restart from seeded random
/// orthogonal matrices. A run that never meets the tolerance returns its
/// last iterate with `converged = false`.
pub fn fastica_symmetric(x: &Mat, g: GFunc, seed: u64) -> Result<UnmixingEstimate, IcaError> {
    fastica_symmetric_with(x, g, seed, &FastIcaParams::default())
}

pub fn fastica_symmetric_with(
    x: &Mat,
    g: GFunc,
    seed: u64,
    params: &FastIcaParams,
) -> Result<UnmixingEstimate, IcaError> {
    let prep = prepare(x)?;
    let p = x.ncols();
    let stream = RngStream::from_seed(seed);

    let mut total_iters = 0;
    let mut last_u: Option<Mat> = None;
    let mut converged = false;
    for attempt in 0..=params.restarts {
        let u0 = if attempt == 0 {
            Mat::identity(p)
        } else {
            let mut rng = stream.stream(attempt as u64, rng::role::ICA);
            random_orthogonal(p, &mut rng)
        };
        match fastica_pass(&prep.xst, g, u0, params) {
            Ok((u, iters, ok)) => {
                total_iters += iters;
                last_u = Some(u);
                if ok {
                    converged = true;
                    break;
                }
            }
            Err(_) => {
                // Orthogonalization collapsed; try the next start.
                total_iters += params.max_iter;
            }
        }
    }
    let u = match last_u {
        Some(u) => u,
        // Every pass collapsed; surface the degeneracy as a linalg error.
        None => {
            return Err(IcaError::Linalg(LinalgError::NotPositiveDefinite {
                min_eigenvalue: 0.0,
            }))
        }
    };
    finalize(
        prep,
        u,
        IcaMethod::FastIca(g),
        converged,
        total_iters,
        false,
    )
}

/// One fixed-point pass: `u_i <- E[x g(u_i' x)] - E[g'(u_i' x)] u_i` for all
/// rows simultaneously, followed by symmetric orthogonalization
/// `U <- (U U')^{-1/2} U`.
fn fastica_pass(
    xst: &Mat,
    g: GFunc,
    mut u: Mat,
    params: &FastIcaParams,
) -> Result<(Mat, usize, bool), LinalgError> {
    let (n, p) = (xst.nrows(), xst.ncols());
    let nf = n as f64;
    u = sym_orthogonalize(&u)?;
    for iter in 1..=params.max_iter {
        let mut unew = Mat::zeros(p, p);
        for i in 0..p {
            let ui = u.row(i);
            let mut acc = vec![0.0f64; p];
            let mut gp_sum = 0.0;
            for j in 0..n {
                let xj = xst.row(j);
                let y: f64 = ui.iter().zip(xj.iter()).map(|(&a, &b)| a * b).sum();
                let gy = g.g(y);
                gp_sum += g.g_prime(y);
                for (a, &xv) in acc.iter_mut().zip(xj.iter()) {
                    *a += xv * gy;
                }
            }
            let gp_mean = gp_sum / nf;
            for (l, a) in acc.iter().enumerate() {
                unew[(i, l)] = a / nf - gp_mean * ui[l];
            }
        }
        let unew = sym_orthogonalize(&unew)?;
        // Convergence: every new row nearly parallel to its predecessor.
        let mut min_align = f64::INFINITY;
        for i in 0..p {
            let dot: f64 = unew
                .row(i)
                .iter()
                .zip(u.row(i).iter())
                .map(|(&a, &b)| a * b)
                .sum();
            min_align = math::min(min_align, math::abs(dot));
        }
        u = unew;
        if 1.0 - min_align < params.tol {
            return Ok((u, iter, true));
        }
    }
    Ok((u, params.max_iter, false))
}

/// `(U U')^{-1/2} U`.
fn sym_orthogonalize(u: &Mat) -> Result<Mat, LinalgError> {
    let uut = SymMatrix::new(symmetrized_product(u))?;
    let corr = inverse_sqrt(&uut)?;
    Ok(corr.as_mat().matmul(u))
}

fn symmetrized_product(u: &Mat) -> Mat {
    let p = u.nrows();
    let mut m = Mat::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v: f64 = u
                .row(i)
                .iter()
                .zip(u.row(j).iter())
                .map(|(&a, &b)| a * b)
                .sum();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Deterministic random orthogonal matrix: QR of a seeded Gaussian matrix by
/// modified Gram-Schmidt with a positive-diagonal convention.
fn random_orthogonal<R: rand_core::RngCore>(p: usize, rng: &mut R) -> Mat {
    let mut m = Mat::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = rng::standard_normal(rng);
        }
    }
    // Orthonormalize the rows.
    for i in 0..p {
        for k in 0..i {
            let proj: f64 = m
                .row(i)
                .iter()
                .zip(m.row(k).iter())
                .map(|(&a, &b)| a * b)
                .sum();
            for l in 0..p {
                m[(i, l)] -= proj * m[(k, l)];
            }
        }
        let norm = math::sqrt(m.row(i).iter().map(|&v| v * v).sum());
        let sign = if m[(i, i)] < 0.0 { -1.0 } else { 1.0 };
        for l in 0..p {
            m[(i, l)] *= sign / norm;
        }
    }
    m
}

/// Applies the ordering and sign conventions and assembles the estimate.
fn finalize(
    prep: Prepared,
    r: Mat,
    method: IcaMethod,
    converged: bool,
    iterations: usize,
    degenerate_kurtosis: bool,
) -> Result<UnmixingEstimate, IcaError> {
    let p = r.nrows();
    // Components under the raw orthogonal factor.
    let components = prep.xst.matmul(&r.transpose());
    let kurt = column_excess_kurtosis(&components);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        kurt[b]
            .partial_cmp(&kurt[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let b = prep.whitener.inv_sqrt_cov.as_mat();
    let mut r_final = Mat::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        // Sign so the largest-magnitude entry of the unmixing row
        // (R * Cov^{-1/2}) is positive.
        let urow = {
            let mut row = vec![0.0f64; p];
            for (l, rv) in row.iter_mut().enumerate() {
                *rv = r
                    .row(src)
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| v * b[(k, l)])
                    .sum();
            }
            row
        };
        let mut best = 0;
        let mut best_abs = 0.0;
        for (l, &v) in urow.iter().enumerate() {
            if math::abs(v) > best_abs {
                best_abs = math::abs(v);
                best = l;
            }
        }
        let flip = if urow[best] < 0.0 { -1.0 } else { 1.0 };
        for l in 0..p {
            r_final[(dst, l)] = flip * r[(src, l)];
        }
    }

    let unmixing = r_final.matmul(b);
    let mixing = prep.sqrt_cov.as_mat().matmul(&r_final.transpose());
    Ok(UnmixingEstimate {
        unmixing,
        mixing,
        method,
        converged,
        iterations,
        degenerate_kurtosis,
        whitener: prep.whitener,
    })
}

fn column_excess_kurtosis(z: &Mat) -> Vec<f64> {
    let (n, p) = (z.nrows(), z.ncols());
    let means = z.col_means();
    let mut m2 = vec![0.0f64; p];
    let mut m4 = vec![0.0f64; p];
    for j in 0..n {
        for (l, (&v, &m)) in z.row(j).iter().zip(&means).enumerate() {
            let d = v - m;
            let d2 = d * d;
            m2[l] += d2;
            m4[l] += d2 * d2;
        }
    }
    (0..p)
        .map(|l| {
            let v2 = m2[l] / n as f64;
            let v4 = m4[l] / n as f64;
            v4 / (v2 * v2) - 3.0
        })
        .collect()
}

/// Dispatches to the requested estimator; `seed` only matters for FastICA.
pub fn unmix(x: &Mat, method: IcaMethod, seed: u64) -> Result<UnmixingEstimate, IcaError> {
    match method {
        IcaMethod::Fobi => fobi(x),
        IcaMethod::Jade => jade(x),
        IcaMethod::FastIca(g) => fastica_symmetric(x, g, seed),
    }
}

/// Estimated residuals `z_j = unmixing * (x_j - mean)` with the mean taken
/// from the estimate's whitener.
pub fn residuals(x: &Mat, est: &UnmixingEstimate) -> Result<ResidualMatrix, IcaError> {
    let p = est.unmixing.nrows();
    if x.ncols() != p {
        return Err(IcaError::DimensionMismatch {
            expected: p,
            got: x.ncols(),
        });
    }
    let n = x.nrows();
    let mut out = Mat::zeros(n, p);
    let mean = &est.whitener.mean;
    let mut centered = vec![0.0f64; p];
    for j in 0..n {
        for (c, (&v, &m)) in centered.iter_mut().zip(x.row(j).iter().zip(mean)) {
            *c = v - m;
        }
        for i in 0..p {
            out[(j, i)] = est
                .unmixing
                .row(i)
                .iter()
                .zip(centered.iter())
                .map(|(&a, &b)| a * b)
                .sum();
        }
    }
    Ok(ResidualMatrix {
        values: out,
        source: ResidualSource::RawResiduals,
    })
}

/// Permutation/scale-invariant recovery error of `w * omega`; zero exactly
/// when the product is a scaled permutation.
pub fn amari_index(w: &Mat, omega: &Mat) -> f64 {
    let g = w.matmul(omega);
    let p = g.nrows();
    let mut total = 0.0;
    for i in 0..p {
        let row_max = g.row(i).iter().fold(0.0f64, |a, &v| math::max(a, math::abs(v)));
        let row_sum: f64 = g.row(i).iter().map(|&v| math::abs(v)).sum();
        total += row_sum / row_max - 1.0;
    }
    for j in 0..p {
        let mut col_max = 0.0f64;
        let mut col_sum = 0.0f64;
        for i in 0..p {
            col_max = math::max(col_max, math::abs(g[(i, j)]));
            col_sum += math::abs(g[(i, j)]);
        }
        total += col_sum / col_max - 1.0;
    }
    total / (2.0 * p as f64)
}
