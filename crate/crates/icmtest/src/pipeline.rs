//! The staged pipeline behind `icmtest pipeline`: decompose a multivariate
//! series into estimated components, remove serial dependence with
//! AIC-selected AR fits per component, then test the residual vectors for
//! total independence.

use icmtest_core::datagen::{ar_prewhiten, DatagenError};
use icmtest_core::ica::IcaError;
use icmtest_core::mat::Mat;
use icmtest_core::resampling::{PipelineMethod, ResamplingError, ResamplingPlan};
use icmtest_core::rng;
use icmtest_core::stats::StatisticSpec;
use serde::Serialize;
use thiserror::Error;

use crate::report::TestReportDoc;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("component decomposition failed: {0}")]
    Decomposition(#[from] IcaError),
    #[error("AR prewhitening of component {component} failed: {source}")]
    Prewhiten {
        component: usize,
        source: DatagenError,
    },
    #[error("column selection {column} is out of range 1..={p}")]
    ColumnOutOfRange { column: usize, p: usize },
    #[error("column selections must be distinct and at least two")]
    BadColumnSelection,
    #[error("independence test failed: {0}")]
    Test(#[from] ResamplingError),
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Estimator producing the components that get prewhitened.
    pub decomposition: PipelineMethod,
    pub max_ar_order: usize,
    /// One-based component subset for the final test; all components when
    /// empty.
    pub columns: Vec<usize>,
    /// Estimator re-run inside the final test.
    pub test_method: PipelineMethod,
    pub spec: StatisticSpec,
    pub plan: ResamplingPlan,
}

#[derive(Debug, Serialize)]
pub struct ArStage {
    pub component: usize,
    pub order: usize,
    pub n_residuals: usize,
}

/// Staged report written by `icmtest pipeline`; key order fixed.
#[derive(Debug, Serialize)]
pub struct PipelineDoc {
    pub n: usize,
    pub p: usize,
    pub decomposition: String,
    pub decomposition_converged: bool,
    pub max_ar_order: usize,
    pub ar: Vec<ArStage>,
    pub columns: Option<Vec<usize>>,
    pub test: TestReportDoc,
    pub version: &'static str,
}

impl PipelineDoc {
    pub fn render(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("pipeline doc serializes");
        out.push('\n');
        out
    }
}

/// Runs the full decompose / prewhiten / test pipeline.
pub fn run(x: &Mat, cfg: &PipelineConfig) -> Result<PipelineDoc, PipelineError> {
    let (n, p) = (x.nrows(), x.ncols());
    let seed = cfg.plan.seed();
    let fitted =
        icmtest_core::resampling::fit_pipeline(x, cfg.decomposition, rng::derive_seed(seed, 1))?;
    let components = &fitted.residuals.values;

    let n_res = n - cfg.max_ar_order;
    let mut ar = Vec::with_capacity(p);
    let mut residual_matrix = Mat::zeros(n_res, p);
    for c in 0..p {
        let series = components.col(c);
        let (res, order) = ar_prewhiten(&series, cfg.max_ar_order).map_err(|source| {
            PipelineError::Prewhiten {
                component: c + 1,
                source,
            }
        })?;
        debug_assert_eq!(res.len(), n_res);
        for (j, &v) in res.iter().enumerate() {
            residual_matrix[(j, c)] = v;
        }
        ar.push(ArStage {
            component: c + 1,
            order,
            n_residuals: res.len(),
        });
    }

    let (test_input, columns) = if cfg.columns.is_empty() {
        (residual_matrix, None)
    } else {
        let mut cols = cfg.columns.clone();
        cols.sort_unstable();
        cols.dedup();
        if cols.len() != cfg.columns.len() || cols.len() < 2 {
            return Err(PipelineError::BadColumnSelection);
        }
        if let Some(&bad) = cols.iter().find(|&&c| c == 0 || c > p) {
            return Err(PipelineError::ColumnOutOfRange { column: bad, p });
        }
        let mut subset = Mat::zeros(n_res, cols.len());
        for (dst, &src) in cols.iter().enumerate() {
            for j in 0..n_res {
                subset[(j, dst)] = residual_matrix[(j, src - 1)];
            }
        }
        (subset, Some(cols))
    };

    let report = crate::parallel::run_test(&test_input, cfg.test_method, &cfg.spec, &cfg.plan)?;
    let test = TestReportDoc::from_report(&report, test_input.nrows(), test_input.ncols(), 0);
    Ok(PipelineDoc {
        n,
        p,
        decomposition: cfg.decomposition.to_string(),
        decomposition_converged: fitted.converged,
        max_ar_order: cfg.max_ar_order,
        ar,
        columns,
        test,
        version: crate::report::VERSION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use icmtest_core::datagen::mix;
    use icmtest_core::ica::IcaMethod;
    use icmtest_core::resampling::Scheme;
    use icmtest_core::rng::{standard_normal, RngStream};
    use icmtest_core::stats::{ScoreSpec, StatisticFamily, WeightKernel};

    /// AR(2) sources, mixed into eight observed channels; the innovations
    /// of the first three sources are linked by a trivariate Clayton copula
    /// (a dependence no unmixing removes) while the rest stay independent.
    fn synthetic_series(n: usize, seed: u64, linked: usize) -> (Mat, Mat) {
        use icmtest_core::rng::{exponential, gamma};
        use icmtest_core::stats::normal::normal_quantile;
        let mut rng = RngStream::from_seed(seed).rng();
        let p = 8;
        let omega = 2.0;
        let coefs: Vec<[f64; 2]> = (0..p)
            .map(|c| [0.3 + 0.4 * (c as f64 / p as f64), -0.3 + 0.05 * c as f64])
            .collect();
        let mut z = Mat::zeros(n, p);
        for t in 2..n {
            let frailty = gamma(&mut rng, 1.0 / omega);
            for c in 0..p {
                let innov = if c < linked {
                    let u = (1.0 + exponential(&mut rng) / frailty).powf(-1.0 / omega);
                    normal_quantile(u)
                } else {
                    standard_normal(&mut rng).powi(3) * 0.3 + standard_normal(&mut rng) * 0.8
                };
                z[(t, c)] = coefs[c][0] * z[(t - 1, c)] + coefs[c][1] * z[(t - 2, c)] + innov;
            }
        }
        let mut mixing = Mat::identity(p);
        let mut mrng = RngStream::from_seed(seed ^ 0xabcd).rng();
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    mixing[(i, j)] = 0.4 * standard_normal(&mut mrng);
                }
            }
        }
        (mix(&z, &mixing, &vec![0.0; p]).unwrap(), z)
    }

    /// One-based indexes of the estimated components best matching the given
    /// true sources, by absolute correlation.
    fn matching_components(x: &Mat, z: &Mat, sources: &[usize]) -> Vec<usize> {
        let fitted = icmtest_core::resampling::fit_pipeline(
            x,
            PipelineMethod::Ica(IcaMethod::Jade),
            0,
        )
        .unwrap();
        let comp = &fitted.residuals.values;
        let n = x.nrows() as f64;
        let corr = |a: &[f64], b: &[f64]| {
            let ma: f64 = a.iter().sum::<f64>() / n;
            let mb: f64 = b.iter().sum::<f64>() / n;
            let mut c = 0.0;
            let mut va = 0.0;
            let mut vb = 0.0;
            for (&x1, &x2) in a.iter().zip(b.iter()) {
                c += (x1 - ma) * (x2 - mb);
                va += (x1 - ma) * (x1 - ma);
                vb += (x2 - mb) * (x2 - mb);
            }
            (c / (va.sqrt() * vb.sqrt())).abs()
        };
        sources
            .iter()
            .map(|&s| {
                let src = z.col(s);
                (0..comp.ncols())
                    .max_by(|&a, &b| {
                        corr(&comp.col(a), &src)
                            .partial_cmp(&corr(&comp.col(b), &src))
                            .unwrap()
                    })
                    .unwrap()
                    + 1
            })
            .collect()
    }

    fn config(columns: Vec<usize>, seed: u64) -> PipelineConfig {
        PipelineConfig {
            decomposition: PipelineMethod::Ica(IcaMethod::Jade),
            max_ar_order: 10,
            columns,
            test_method: PipelineMethod::Ica(IcaMethod::Jade),
            spec: StatisticSpec::new(
                StatisticFamily::CfRank,
                WeightKernel::gaussian(1.0),
                ScoreSpec::Identity,
            )
            .unwrap(),
            plan: ResamplingPlan::new(Scheme::Permutation, 199, seed).unwrap(),
        }
    }

    #[test]
    fn dependent_sources_are_rejected() {
        let (x, _z) = synthetic_series(2000, 1, 3);
        let doc = run(&x, &config(vec![], 7)).unwrap();
        assert_eq!(doc.ar.len(), 8);
        assert!(doc.ar.iter().all(|s| s.order >= 1), "orders {:?}", doc.ar);
        assert!(
            doc.test.p_value < 0.05,
            "expected rejection, p = {}",
            doc.test.p_value
        );
    }

    #[test]
    fn independent_subset_is_not_rejected() {
        let (x, z) = synthetic_series(2000, 2, 3);
        // Estimated components carrying three of the independent sources.
        let columns = matching_components(&x, &z, &[4, 6, 7]);
        let mut distinct = columns.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 3, "source matching collapsed: {columns:?}");
        let doc = run(&x, &config(columns, 8)).unwrap();
        assert_eq!(doc.columns, Some(distinct));
        assert!(
            doc.test.p_value > 0.1,
            "expected no rejection, p = {}",
            doc.test.p_value
        );
    }

    #[test]
    fn out_of_range_columns_error() {
        let (x, _z) = synthetic_series(600, 3, 0);
        match run(&x, &config(vec![2, 11], 9)) {
            Err(PipelineError::ColumnOutOfRange { column: 11, p: 8 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
