//! Rayon drivers for the resampling loops.
//!
//! Each replicate draws from its own `(seed, index, role)` stream and the
//! reductions are counts, so these produce exactly the same reports as the
//! serial functions in `icmtest_core::resampling` regardless of thread
//! count or scheduling.

use icmtest_core::mat::Mat;
use icmtest_core::resampling::{
    self, PipelineMethod, ResamplingError, ResamplingPlan, Scheme, TestReport,
};
use icmtest_core::rng::{self, RngStream};
use icmtest_core::stats::{ResampleEvaluator, StatisticSpec};
use rayon::prelude::*;

/// Parallel permutation p-value; identical to the serial one.
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
    let exceed = (1..=plan.m() as u64)
        .into_par_iter()
        .filter(|&m| resampling::permutation_replicate(&evaluator, &stream, m) >= t)
        .count();
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

/// Parallel bootstrap p-value; identical to the serial one.
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
    let fitted = resampling::fit_pipeline(x, method, rng::derive_seed(plan.seed(), 0))?;
    let t = spec.evaluate(&fitted.residuals.values).value;
    let (exceed, failed) = (1..=plan.m() as u64)
        .into_par_iter()
        .map(
            |m| match resampling::bootstrap_replicate(&fitted, method, spec, &stream, m) {
                Ok(tm) => (usize::from(tm >= t), 0usize),
                Err(_) => (0usize, 1usize),
            },
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
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

/// Full single-dataset test with parallel resampling.
pub fn run_test(
    x: &Mat,
    method: PipelineMethod,
    spec: &StatisticSpec,
    plan: &ResamplingPlan,
) -> Result<TestReport, ResamplingError> {
    match plan.scheme() {
        Scheme::Permutation => {
            let fitted = resampling::fit_pipeline(x, method, rng::derive_seed(plan.seed(), 0))?;
            let mut report = permutation_pvalue(&fitted.residuals.values, spec, plan)?;
            report.method = method;
            report.converged = fitted.converged;
            Ok(report)
        }
        Scheme::Bootstrap => bootstrap_pvalue(x, method, spec, plan),
    }
}
