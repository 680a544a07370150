//! Seeded samplers for the simulation settings, generic mixing, and AR
//! prewhitening for serially dependent components.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::linalg::{self, LinalgError};
use crate::mat::Mat;
use crate::math;
use crate::rng::{self, Rng, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub enum DatagenError {
    /// The mixing matrix is rank deficient.
    SingularMixing,
    /// The AR design matrix is numerically singular (constant series).
    NearSingularDesign,
    /// The series is too short for the requested AR order.
    SeriesTooShort { n: usize, max_order: usize },
}

impl fmt::Display for DatagenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatagenError::SingularMixing => write!(f, "mixing matrix is singular"),
            DatagenError::NearSingularDesign => {
                write!(f, "autoregression design is near singular (constant series?)")
            }
            DatagenError::SeriesTooShort { n, max_order } => write!(
                f,
                "series of length {n} is too short for AR order {max_order} (need n > 10 * max_order)"
            ),
        }
    }
}

impl core::error::Error for DatagenError {}

/// The three simulation settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SettingKind {
    /// Independent uniform, exponential, and chi-square(3) components.
    IndepMix,
    /// Spherical t with the given degrees of freedom; infinite df is the
    /// spherical Gaussian, the only member satisfying the model.
    SphericalT,
    /// Clayton copula with dependence parameter `omega`; independent
    /// uniforms at `omega = 0`.
    ClaytonCopula,
}

/// A fully specified data-generating configuration.
#[derive(Clone, Debug)]
pub struct SettingSpec {
    pub kind: SettingKind,
    pub n: usize,
    /// Degrees of freedom for [`SettingKind::SphericalT`]; may be infinite.
    pub df: f64,
    /// Dependence parameter for [`SettingKind::ClaytonCopula`].
    pub omega: f64,
    /// Optional mixing applied to the sampled sources.
    pub mixing: Option<Mat>,
    pub seed: u64,
}

impl SettingSpec {
    pub fn setting1(n: usize, seed: u64) -> Self {
        SettingSpec {
            kind: SettingKind::IndepMix,
            n,
            df: f64::INFINITY,
            omega: 0.0,
            mixing: None,
            seed,
        }
    }

    pub fn setting2(n: usize, df: f64, seed: u64) -> Self {
        SettingSpec {
            kind: SettingKind::SphericalT,
            n,
            df,
            omega: 0.0,
            mixing: None,
            seed,
        }
    }

    pub fn setting3(n: usize, omega: f64, seed: u64) -> Self {
        SettingSpec {
            kind: SettingKind::ClaytonCopula,
            n,
            df: f64::INFINITY,
            omega,
            mixing: None,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.mixing.as_ref().map_or(3, |m| m.nrows())
    }

    /// Draws the dataset addressed by this spec's seed.
    pub fn sample(&self) -> Result<Mat, DatagenError> {
        self.sample_replicate(0)
    }

    /// Draws the dataset for Monte Carlo replication `r`; replications are
    /// independent substreams of the seed.
    pub fn sample_replicate(&self, r: u64) -> Result<Mat, DatagenError> {
        let mut stream = RngStream::from_seed(self.seed).stream(r, rng::role::DATA);
        let z = self.sample_sources(&mut stream);
        match &self.mixing {
            None => Ok(z),
            Some(omega) => mix(&z, omega, &vec![0.0; omega.nrows()]),
        }
    }

    fn sample_sources(&self, stream: &mut Rng) -> Mat {
        match self.kind {
            SettingKind::IndepMix => sample_setting1_with(self.n, stream),
            SettingKind::SphericalT => sample_setting2_with(self.n, self.df, stream),
            SettingKind::ClaytonCopula => sample_setting3_with(self.n, self.omega, stream),
        }
    }
}

/// Uniform(0,1), Exponential(1), and chi-square(3) columns.
pub fn sample_setting1(n: usize, seed: u64) -> Mat {
    let mut stream = RngStream::from_seed(seed).stream(0, rng::role::DATA);
    sample_setting1_with(n, &mut stream)
}

pub fn sample_setting1_with<R: RngCore>(n: usize, rng: &mut R) -> Mat {
    let mut out = Mat::zeros(n, 3);
    for j in 0..n {
        out[(j, 0)] = rng::uniform_open01(rng);
        out[(j, 1)] = rng::exponential(rng);
        out[(j, 2)] = rng::chi_square(rng, 3.0);
    }
    out
}

/// Spherical t: a trivariate standard normal divided by the square root of
/// an independent chi-square over its degrees of freedom. Infinite df gives
/// the Gaussian directly.
pub fn sample_setting2(n: usize, df: f64, seed: u64) -> Mat {
    let mut stream = RngStream::from_seed(seed).stream(0, rng::role::DATA);
    sample_setting2_with(n, df, &mut stream)
}

pub fn sample_setting2_with<R: RngCore>(n: usize, df: f64, rng: &mut R) -> Mat {
    assert!(df > 0.0, "degrees of freedom must be positive");
    let mut out = Mat::zeros(n, 3);
    for j in 0..n {
        let g = [
            rng::standard_normal(rng),
            rng::standard_normal(rng),
            rng::standard_normal(rng),
        ];
        let scale = if df.is_infinite() {
            1.0
        } else {
            1.0 / math::sqrt(rng::chi_square(rng, df) / df)
        };
        for (l, &v) in g.iter().enumerate() {
            out[(j, l)] = v * scale;
        }
    }
    out
}

/// Clayton copula via the Marshall-Olkin gamma-frailty construction:
/// `V ~ Gamma(1/omega)`, `E_l` i.i.d. Exponential(1), and
/// `U_l = (1 + E_l / V)^{-1/omega}`. At `omega = 0` the components are
/// independent uniforms.
pub fn sample_setting3(n: usize, omega: f64, seed: u64) -> Mat {
    let mut stream = RngStream::from_seed(seed).stream(0, rng::role::DATA);
    sample_setting3_with(n, omega, &mut stream)
}

pub fn sample_setting3_with<R: RngCore>(n: usize, omega: f64, rng: &mut R) -> Mat {
    assert!(omega >= 0.0, "omega must be non-negative");
    let mut out = Mat::zeros(n, 3);
    if omega == 0.0 {
        for j in 0..n {
            for l in 0..3 {
                out[(j, l)] = rng::uniform_open01(rng);
            }
        }
        return out;
    }
    let inv_omega = 1.0 / omega;
    for j in 0..n {
        let v = rng::gamma(rng, inv_omega);
        for l in 0..3 {
            let e = rng::exponential(rng);
            out[(j, l)] = math::powf(1.0 + e / v, -inv_omega);
        }
    }
    out
}

/// Applies the model `x_j = mu + omega * z_j` to every row.
pub fn mix(z: &Mat, omega: &Mat, mu: &[f64]) -> Result<Mat, DatagenError> {
    let p = z.ncols();
    assert_eq!(omega.nrows(), p, "mixing matrix dimension mismatch");
    assert_eq!(omega.ncols(), p, "mixing matrix dimension mismatch");
    assert_eq!(mu.len(), p, "shift dimension mismatch");
    // Full-rank check through the Gram matrix spectrum.
    let gram = linalg::SymMatrix::new(omega.transpose().matmul(omega))
        .map_err(|_| DatagenError::SingularMixing)?;
    match linalg::sym_eigen(&gram) {
        Ok(eig) => {
            let lmax = eig.values[0];
            let lmin = eig.values[p - 1];
            if lmax <= 0.0 || lmin <= linalg::SPD_EPS * lmax {
                return Err(DatagenError::SingularMixing);
            }
        }
        Err(_) => return Err(DatagenError::SingularMixing),
    }
    let n = z.nrows();
    let mut out = Mat::zeros(n, p);
    for j in 0..n {
        let zj = z.row(j);
        let row = out.row_mut(j);
        for i in 0..p {
            row[i] = mu[i]
                + omega
                    .row(i)
                    .iter()
                    .zip(zj.iter())
                    .map(|(&a, &b)| a * b)
                    .sum::<f64>();
        }
    }
    Ok(out)
}

/// Fits AR(k) by conditional least squares (with intercept) for
/// `k = 0..=max_order` on the common window that drops the first
/// `max_order` observations, picks the order minimizing
/// `AIC = n_eff * ln(rss / n_eff) + 2k`, and returns that fit's residuals
/// (length `n - max_order`) together with the chosen order.
pub fn ar_prewhiten(series: &[f64], max_order: usize) -> Result<(Vec<f64>, usize), DatagenError> {
    let n = series.len();
    if n <= 10 * max_order || n <= max_order + 2 {
        return Err(DatagenError::SeriesTooShort { n, max_order });
    }
    let n_eff = n - max_order;

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for k in 0..=max_order {
        let residuals = ar_residuals(series, max_order, k)?;
        debug_assert_eq!(residuals.len(), n_eff);
        let rss: f64 = residuals.iter().map(|&r| r * r).sum();
        let sigma2 = rss / n_eff as f64;
        let aic = n_eff as f64 * math::ln(sigma2) + 2.0 * k as f64;
        let better = match &best {
            None => true,
            Some((best_aic, _, _)) => aic < *best_aic,
        };
        if better {
            best = Some((aic, k, residuals));
        }
    }
    let (_, order, residuals) = best.expect("at least the AR(0) fit ran");
    Ok((residuals, order))
}

/// Least-squares AR(k) residuals on the common window.
fn ar_residuals(series: &[f64], max_order: usize, k: usize) -> Result<Vec<f64>, DatagenError> {
    let n = series.len();
    let n_eff = n - max_order;
    let dim = k + 1;

    // Normal equations for the design [1, y_{t-1}, ..., y_{t-k}].
    let mut gram = Mat::zeros(dim, dim);
    let mut rhs = vec![0.0f64; dim];
    let mut row = vec![0.0f64; dim];
    for t in max_order..n {
        row[0] = 1.0;
        for lag in 1..=k {
            row[lag] = series[t - lag];
        }
        for a in 0..dim {
            rhs[a] += row[a] * series[t];
            for b in a..dim {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..dim {
        for b in (a + 1)..dim {
            gram[(b, a)] = gram[(a, b)];
        }
    }

    let gram = linalg::SymMatrix::new(gram).map_err(|_| DatagenError::NearSingularDesign)?;
    let eig = match linalg::sym_eigen(&gram) {
        Ok(e) => e,
        Err(LinalgError::NoConvergence { .. }) | Err(_) => {
            return Err(DatagenError::NearSingularDesign)
        }
    };
    let lmax = eig.values[0];
    let lmin = eig.values[dim - 1];
    if lmax <= 0.0 || lmin <= 1e-12 * lmax {
        return Err(DatagenError::NearSingularDesign);
    }
    // beta = V diag(1/lambda) V' rhs
    let mut tmp = vec![0.0f64; dim];
    for c in 0..dim {
        let mut acc = 0.0;
        for r in 0..dim {
            acc += eig.vectors[(r, c)] * rhs[r];
        }
        tmp[c] = acc / eig.values[c];
    }
    let mut beta = vec![0.0f64; dim];
    for r in 0..dim {
        let mut acc = 0.0;
        for c in 0..dim {
            acc += eig.vectors[(r, c)] * tmp[c];
        }
        beta[r] = acc;
    }

    let mut residuals = Vec::with_capacity(n_eff);
    for t in max_order..n {
        let mut fitted = beta[0];
        for lag in 1..=k {
            fitted += beta[lag] * series[t - lag];
        }
        residuals.push(series[t] - fitted);
    }
    Ok(residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, RngStream};

    #[test]
    fn setting1_moments_and_independence() {
        let x = sample_setting1(100_000, 42);
        let means = x.col_means();
        assert!((means[0] - 0.5).abs() < 0.005, "uniform mean {}", means[0]);
        assert!((means[1] - 1.0).abs() < 0.02, "exponential mean {}", means[1]);
        assert!((means[2] - 3.0).abs() < 0.05, "chi2 mean {}", means[2]);
        let cov = linalg::sample_covariance(&x).unwrap();
        for a in 0..3 {
            for b in (a + 1)..3 {
                let corr = cov.as_mat()[(a, b)]
                    / math::sqrt(cov.as_mat()[(a, a)] * cov.as_mat()[(b, b)]);
                assert!(corr.abs() < 0.02, "corr({a},{b}) = {corr}");
            }
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        assert_eq!(sample_setting1(50, 9), sample_setting1(50, 9));
        assert_eq!(sample_setting2(50, 5.0, 9), sample_setting2(50, 5.0, 9));
        assert_eq!(sample_setting3(50, 1.0, 9), sample_setting3(50, 1.0, 9));
        let spec = SettingSpec::setting3(40, 0.5, 3);
        assert_eq!(
            spec.sample_replicate(7).unwrap(),
            spec.sample_replicate(7).unwrap()
        );
        assert_ne!(
            spec.sample_replicate(7).unwrap(),
            spec.sample_replicate(8).unwrap()
        );
    }

    #[test]
    fn setting2_gaussian_limit_kurtosis() {
        let x = sample_setting2(100_000, f64::INFINITY, 7);
        for l in 0..3 {
            let col = x.col(l);
            let n = col.len() as f64;
            let mean: f64 = col.iter().sum::<f64>() / n;
            let m2: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let m4: f64 = col.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            let kurt = m4 / (m2 * m2);
            assert!((kurt - 3.0).abs() < 0.1, "kurtosis {kurt}");
        }
    }

    #[test]
    fn setting2_cauchy_tails_are_heavy() {
        let mut exceed = 0;
        for seed in 0..10 {
            let x = sample_setting2(10_000, 1.0, seed);
            let max = x.data().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            if max > 50.0 {
                exceed += 1;
            }
        }
        assert!(exceed >= 9, "only {exceed}/10 draws had a tail beyond 50");
    }

    #[test]
    fn setting2_is_spherical() {
        let x = sample_setting2(100_000, 5.0, 11);
        let cov = linalg::sample_covariance(&x).unwrap();
        for a in 0..3 {
            for b in (a + 1)..3 {
                let corr = cov.as_mat()[(a, b)]
                    / math::sqrt(cov.as_mat()[(a, a)] * cov.as_mat()[(b, b)]);
                assert!(corr.abs() < 0.02, "corr({a},{b}) = {corr}");
            }
        }
    }

    #[test]
    fn setting3_support_and_tau() {
        let x = sample_setting3(50_000, 1.0, 5);
        assert!(x.data().iter().all(|&u| u > 0.0 && u < 1.0));
        // Kendall tau of a Clayton pair is omega / (omega + 2) = 1/3.
        let (a, b) = (x.col(0), x.col(1));
        let n = a.len();
        let mut concordant = 0i64;
        let mut discordant = 0i64;
        for i in 0..n {
            for j in (i + 1)..n {
                let s = (a[i] - a[j]) * (b[i] - b[j]);
                if s > 0.0 {
                    concordant += 1;
                } else if s < 0.0 {
                    discordant += 1;
                }
            }
        }
        let pairs = (n * (n - 1) / 2) as f64;
        let tau = (concordant - discordant) as f64 / pairs;
        assert!((tau - 1.0 / 3.0).abs() < 0.01, "tau = {tau}");
    }

    #[test]
    fn setting3_zero_omega_is_uniform() {
        let x = sample_setting3(50_000, 0.0, 13);
        // KS distance of each margin against U(0,1).
        for l in 0..3 {
            let mut col = x.col(l);
            col.sort_by(|p, q| p.partial_cmp(q).unwrap());
            let n = col.len() as f64;
            let mut ks = 0.0f64;
            for (i, &u) in col.iter().enumerate() {
                let ecdf_hi = (i + 1) as f64 / n;
                let ecdf_lo = i as f64 / n;
                ks = ks.max((ecdf_hi - u).abs()).max((u - ecdf_lo).abs());
            }
            assert!(ks < 0.02, "margin {l} KS {ks}");
        }
    }

    #[test]
    fn mix_identity_roundtrip() {
        let z = sample_setting1(30, 21);
        let x = mix(&z, &Mat::identity(3), &[0.0; 3]).unwrap();
        assert_eq!(x, z);
    }

    #[test]
    fn mix_rejects_singular() {
        let z = sample_setting1(10, 2);
        let singular = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(
            mix(&z, &singular, &[0.0; 3]),
            Err(DatagenError::SingularMixing)
        );
    }

    #[test]
    fn mix_inverse_recovers_centered_sources() {
        let z = sample_setting1(200, 8);
        let omega = Mat::from_rows(&[&[2.0, 0.3, -0.5], &[0.1, 1.5, 0.4], &[-0.7, 0.2, 1.1]]);
        let x = mix(&z, &omega, &[1.0, -2.0, 0.5]).unwrap();
        // Invert through the Gram system: z = (O'O)^{-1} O' (x - mu).
        let gram = linalg::SymMatrix::new(omega.transpose().matmul(&omega)).unwrap();
        let eig = linalg::sym_eigen(&gram).unwrap();
        let inv = {
            let mut m = Mat::zeros(3, 3);
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        acc += eig.vectors[(i, k)] * eig.vectors[(j, k)] / eig.values[k];
                    }
                    m[(i, j)] = acc;
                }
            }
            m.matmul(&omega.transpose())
        };
        for j in 0..z.nrows() {
            let shifted: alloc::vec::Vec<f64> = x
                .row(j)
                .iter()
                .zip([1.0, -2.0, 0.5])
                .map(|(&v, m)| v - m)
                .collect();
            let rec = inv.matvec(&shifted);
            for l in 0..3 {
                assert!((rec[l] - z[(j, l)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ar_white_noise_prefers_order_zero() {
        let mut chosen_zero = 0;
        for seed in 0..10 {
            let mut rng = RngStream::from_seed(seed).rng();
            let series: Vec<f64> = (0..2000).map(|_| standard_normal(&mut rng)).collect();
            let (_res, order) = ar_prewhiten(&series, 10).unwrap();
            if order == 0 {
                chosen_zero += 1;
            }
        }
        assert!(chosen_zero >= 8, "order 0 chosen only {chosen_zero}/10 times");
    }

    #[test]
    fn ar_one_is_detected_and_whitened() {
        let mut rng = RngStream::from_seed(77).rng();
        let n = 3000;
        let mut series = vec![0.0f64; n];
        for t in 1..n {
            series[t] = 0.8 * series[t - 1] + standard_normal(&mut rng);
        }
        let (res, order) = ar_prewhiten(&series, 10).unwrap();
        assert!(order >= 1, "chose order {order}");
        // Residual lag-1 autocorrelation should be near zero.
        let m = res.len();
        let mean: f64 = res.iter().sum::<f64>() / m as f64;
        let var: f64 = res.iter().map(|&r| (r - mean) * (r - mean)).sum::<f64>();
        let mut lag1 = 0.0;
        for t in 1..m {
            lag1 += (res[t] - mean) * (res[t - 1] - mean);
        }
        assert!((lag1 / var).abs() < 0.05, "lag-1 autocorr {}", lag1 / var);
    }

    #[test]
    fn ar_constant_series_is_singular() {
        let series = vec![3.25f64; 500];
        assert_eq!(
            ar_prewhiten(&series, 5),
            Err(DatagenError::NearSingularDesign)
        );
    }

    #[test]
    fn ar_short_series_is_rejected() {
        let series = vec![0.0f64; 50];
        assert!(matches!(
            ar_prewhiten(&series, 10),
            Err(DatagenError::SeriesTooShort { .. })
        ));
    }
}
