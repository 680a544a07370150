//! Calibration of the statistics: columnwise permutation, bootstrap with
//! re-estimation, warp-speed studies, and p-value assembly.
//!
//! Everything is addressed by `(seed, replicate index, role)` streams, so a
//! report is a pure function of its inputs no matter how replicates are
//! scheduled.

use alloc::vec::Vec;
use core::fmt;

use crate::ica::{self, IcaError, IcaMethod, ResidualMatrix, ResidualSource, UnmixingEstimate};
use crate::mat::Mat;
use crate::rng::{self, RngStream};
use crate::stats::{ColumnPermutations, ResampleEvaluator, StatisticSpec, StatisticValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Permutation,
    Bootstrap,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Permutation => write!(f, "permutation"),
            Scheme::Bootstrap => write!(f, "bootstrap"),
        }
    }
}

/// How residuals enter the test: through an unmixing estimate, or taken as
/// given (the oracle variant used for exactness checks and simulation
/// baselines).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineMethod {
    /// Use the centered data directly as residuals.
    Oracle,
    Ica(IcaMethod),
}

impl fmt::Display for PipelineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineMethod::Oracle => write!(f, "oracle"),
            PipelineMethod::Ica(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResamplingError {
    /// Plans need at least one resample.
    InvalidReplicateCount,
    /// The operation was called with a plan for the other scheme.
    WrongScheme { expected: Scheme },
    /// More than a tenth of the bootstrap re-estimations failed.
    TooManyFailures { failed: usize, m: usize },
    /// Warp-speed studies need enough replications to pool.
    TooFewReplications { got: usize },
    Ica(IcaError),
}

impl fmt::Display for ResamplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResamplingError::InvalidReplicateCount => {
                write!(f, "resampling plans require M >= 1")
            }
            ResamplingError::WrongScheme { expected } => {
                write!(f, "plan scheme mismatch: this operation expects {expected}")
            }
            ResamplingError::TooManyFailures { failed, m } => {
                write!(f, "{failed} of {m} bootstrap re-estimations failed (over 10%)")
            }
            ResamplingError::TooFewReplications { got } => {
                write!(f, "warp-speed studies need at least 100 replications, got {got}")
            }
            ResamplingError::Ica(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ResamplingError {}

impl From<IcaError> for ResamplingError {
    fn from(e: IcaError) -> Self {
        ResamplingError::Ica(e)
    }
}

/// Resampling scheme, replicate count, and seed; the seed fully determines
/// every resample drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResamplingPlan {
    scheme: Scheme,
    m: usize,
    seed: u64,
    warp_speed: bool,
}

impl ResamplingPlan {
    pub fn new(scheme: Scheme, m: usize, seed: u64) -> Result<Self, ResamplingError> {
        if m == 0 {
            return Err(ResamplingError::InvalidReplicateCount);
        }
        Ok(ResamplingPlan {
            scheme,
            m,
            seed,
            warp_speed: false,
        })
    }

    pub fn with_warp_speed(mut self, warp_speed: bool) -> Self {
        self.warp_speed = warp_speed;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn warp_speed(&self) -> bool {
        self.warp_speed
    }
}

/// Outcome of a calibrated test run.
#[derive(Clone, Debug)]
pub struct TestReport {
    pub statistic: StatisticValue,
    /// `(#{T^m >= T} + 1) / (M_used + 1)`.
    pub p_value: f64,
    /// Replicates that entered the p-value.
    pub m_used: usize,
    /// Bootstrap replicates dropped because re-estimation failed.
    pub m_failed: usize,
    pub scheme: Scheme,
    pub method: PipelineMethod,
    pub converged: bool,
    pub seed: u64,
    /// Stamped by drivers that measure wall time; zero from the pure API.
    pub elapsed_ms: u64,
}

/// Residuals plus what the bootstrap needs to rebuild observations.
#[derive(Clone, Debug)]
pub struct FittedTest {
    pub residuals: ResidualMatrix,
    /// Estimated mixing matrix (identity for the oracle pipeline).
    pub mixing: Mat,
    pub converged: bool,
    pub estimate: Option<UnmixingEstimate>,
}

/// Runs the estimation stage of the pipeline.
pub fn fit_pipeline(x: &Mat, method: PipelineMethod, seed: u64) -> Result<FittedTest, IcaError> {
    match method {
        PipelineMethod::Oracle => {
            let means = x.col_means();
            let mut centered = x.clone();
            for j in 0..x.nrows() {
                for (v, &m) in centered.row_mut(j).iter_mut().zip(&means) {
                    *v -= m;
                }
            }
            Ok(FittedTest {
                residuals: ResidualMatrix {
                    values: centered,
                    source: ResidualSource::RawResiduals,
                },
                mixing: Mat::identity(x.ncols()),
                converged: true,
                estimate: None,
            })
        }
        PipelineMethod::Ica(m) => {
            let est = ica::unmix(x, m, seed)?;
            let residuals = ica::residuals(x, &est)?;
            Ok(FittedTest {
                residuals,
                mixing: est.mixing.clone(),
                converged: est.converged,
                estimate: Some(est),
            })
        }
    }
}

/// One draw of the columnwise permutation scheme applied to `z`: the first
/// column is the fixed representative of the common-permutation quotient,
/// the others are independently permuted.
pub fn permute_residuals<R: rand_core::RngCore>(z: &Mat, rng: &mut R) -> Mat {
    ColumnPermutations::draw(rng, z.nrows(), z.ncols()).apply(z)
}

/// Permutation p-value for the statistic on the given residuals. The
/// estimate is not re-run: the scheme conditions on the order statistic of
/// the residuals.
pub fn permutation_pvalue(
    z: &Mat,
    spec: &StatisticSpec,
    plan: &ResamplingPlan,
) -> Result<TestReport, ResamplingError> {
    if plan.scheme() != Scheme::Permutation {
        return Err(ResamplingError::WrongScheme {
            expected: Scheme::Permutation,
        });
    }
    let evaluator = ResampleEvaluator::new(*spec, z);
    let t = evaluator.base_statistic();
    let stream = RngStream::from_seed(plan.seed());
    let mut exceed = 0usize;
    for m in 1..=plan.m() {
        let tm = permutation_replicate(&evaluator, &stream, m as u64);
        if tm >= t {
            exceed += 1;
        }
    }
    Ok(TestReport {
        statistic: spec.value_of(t),
        p_value: (exceed + 1) as f64 / (plan.m() + 1) as f64,
        m_used: plan.m(),
        m_failed: 0,
        scheme: Scheme::Permutation,
        method: PipelineMethod::Oracle,
        converged: true,
        seed: plan.seed(),
        elapsed_ms: 0,
    })
}

/// Statistic of permutation replicate `m`; exposed so drivers can fan
/// replicates out across threads without changing the draws.
pub fn permutation_replicate(
    evaluator: &ResampleEvaluator,
    stream: &RngStream,
    m: u64,
) -> f64 {
    let mut rng = stream.stream(m, rng::role::PERMUTATION);
    let perms = ColumnPermutations::draw(&mut rng, evaluator.n(), evaluator.p());
    evaluator.evaluate(&perms)
}

/// Column-independent resample with replacement from the residual columns.
pub(crate) fn bootstrap_resample_columns<R: rand_core::RngCore>(
    values: &Mat,
    rng: &mut R,
) -> Mat {
    let (n, p) = (values.nrows(), values.ncols());
    let mut out = Mat::zeros(n, p);
    for l in 0..p {
        for j in 0..n {
            out[(j, l)] = values[(rng::uniform_index(rng, n), l)];
        }
    }
    out
}

/// Statistic of bootstrap replicate `m`: draws the columnwise resample,
/// rebuilds observations through the estimated mixing, re-runs the full
/// pipeline, and evaluates the statistic. `Err` means the re-estimation
/// failed for this replicate.
pub fn bootstrap_replicate(
    fitted: &FittedTest,
    method: PipelineMethod,
    spec: &StatisticSpec,
    stream: &RngStream,
    m: u64,
) -> Result<f64, IcaError> {
    let mut rng = stream.stream(m, rng::role::BOOTSTRAP);
    let z_m = bootstrap_resample_columns(&fitted.residuals.values, &mut rng);
    // x_j = mixing * z_j, i.e. X = Z * mixing'.
    let x_m = z_m.matmul(&fitted.mixing.transpose());
    let refit = fit_pipeline(&x_m, method, rng::derive_seed(stream.seed(), m))?;
    Ok(spec.evaluate(&refit.residuals.values).value)
}

/// Bootstrap p-value following the resample/remix/re-estimate scheme.
/// Replicates whose re-estimation fails are dropped; more than 10% failures
/// abort the run.
pub fn bootstrap_pvalue(
    x: &Mat,
    method: PipelineMethod,
    spec: &StatisticSpec,
    plan: &ResamplingPlan,
) -> Result<TestReport, ResamplingError> {
    if plan.scheme() != Scheme::Bootstrap {
        return Err(ResamplingError::WrongScheme {
            expected: Scheme::Bootstrap,
        });
    }
    let stream = RngStream::from_seed(plan.seed());
    let fitted = fit_pipeline(x, method, rng::derive_seed(plan.seed(), 0))?;
    let t = spec.evaluate(&fitted.residuals.values).value;
    let mut exceed = 0usize;
    let mut failed = 0usize;
    for m in 1..=plan.m() {
        match bootstrap_replicate(&fitted, method, spec, &stream, m as u64) {
            Ok(tm) => {
                if tm >= t {
                    exceed += 1;
                }
            }
            Err(_) => failed += 1,
        }
    }
    if failed * 10 > plan.m() {
        return Err(ResamplingError::TooManyFailures {
            failed,
            m: plan.m(),
        });
    }
    let m_used = plan.m() - failed;
    Ok(TestReport {
        statistic: spec.value_of(t),
        p_value: (exceed + 1) as f64 / (m_used + 1) as f64,
        m_used,
        m_failed: failed,
        scheme: Scheme::Bootstrap,
        method,
        converged: fitted.converged,
        seed: plan.seed(),
        elapsed_ms: 0,
    })
}

/// Full single-dataset test: estimate, compute the statistic, calibrate.
pub fn run_test(
    x: &Mat,
    method: PipelineMethod,
    spec: &StatisticSpec,
    plan: &ResamplingPlan,
) -> Result<TestReport, ResamplingError> {
    match plan.scheme() {
        Scheme::Permutation => {
            let fitted = fit_pipeline(x, method, rng::derive_seed(plan.seed(), 0))?;
            let mut report = permutation_pvalue(&fitted.residuals.values, spec, plan)?;
            report.method = method;
            report.converged = fitted.converged;
            Ok(report)
        }
        Scheme::Bootstrap => bootstrap_pvalue(x, method, spec, plan),
    }
}

/// What a simulation study runs per replication.
#[derive(Clone, Copy, Debug)]
pub struct StudyPipeline {
    pub method: PipelineMethod,
    pub spec: StatisticSpec,
    pub scheme: Scheme,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub replications: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub alpha: f64,
    /// Pooled reference statistics (one per successful replication).
    pub pool_size: usize,
    pub failures: usize,
}

/// Warp-speed size/power estimate: each replication draws fresh data,
/// computes its statistic and exactly one resampled statistic; the pooled
/// resamples form the common reference distribution, and a replication
/// rejects when its statistic exceeds the empirical `1 - alpha` pool
/// quantile.
pub fn warp_speed_study(
    setting: &crate::datagen::SettingSpec,
    pipeline: &StudyPipeline,
    replications: usize,
    alpha: f64,
) -> Result<StudyResult, ResamplingError> {
    if replications < 100 {
        return Err(ResamplingError::TooFewReplications { got: replications });
    }
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let mut stats = Vec::with_capacity(replications);
    let mut pool = Vec::with_capacity(replications);
    let mut failures = 0usize;
    for r in 0..replications {
        match warp_speed_replicate(setting, pipeline, r as u64) {
            Ok((t, t_star)) => {
                stats.push(t);
                pool.push(t_star);
            }
            Err(_) => failures += 1,
        }
    }
    Ok(assemble_warp_speed(stats, pool, replications, failures, alpha))
}

/// One warp-speed replication: `(T_r, T*_r)`. Exposed so drivers can fan
/// replications out across threads without changing the draws.
pub fn warp_speed_replicate(
    setting: &crate::datagen::SettingSpec,
    pipeline: &StudyPipeline,
    r: u64,
) -> Result<(f64, f64), ResamplingError> {
    let stream = RngStream::from_seed(setting.seed);
    let x = setting
        .sample_replicate(r)
        .map_err(|_| ResamplingError::Ica(IcaError::TooFewRows { n: 0, p: 0 }))?;
    let fitted = fit_pipeline(&x, pipeline.method, rng::derive_seed(setting.seed, r))?;
    let t = pipeline.spec.evaluate(&fitted.residuals.values).value;
    let t_star = match pipeline.scheme {
        Scheme::Permutation => {
            let mut rng = stream.stream(r, rng::role::PERMUTATION);
            let permuted = permute_residuals(&fitted.residuals.values, &mut rng);
            pipeline.spec.evaluate(&permuted).value
        }
        Scheme::Bootstrap => {
            bootstrap_replicate(&fitted, pipeline.method, &pipeline.spec, &stream, r)?
        }
    };
    Ok((t, t_star))
}

/// Pools the resampled statistics and counts rejections at `alpha`.
pub fn assemble_warp_speed(
    stats: Vec<f64>,
    mut pool: Vec<f64>,
    replications: usize,
    failures: usize,
    alpha: f64,
) -> StudyResult {
    pool.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let r = pool.len();
    // Empirical quantile of order 1 - alpha: the ceil((1 - alpha) r)-th
    // order statistic.
    let rank = crate::math::ceil((1.0 - alpha) * r as f64) as usize;
    let crit = pool[rank.clamp(1, r) - 1];
    let rejections = stats.iter().filter(|&&t| t > crit).count();
    StudyResult {
        replications,
        rejections,
        rejection_rate: rejections as f64 / stats.len().max(1) as f64,
        alpha,
        pool_size: r,
        failures,
    }
}
