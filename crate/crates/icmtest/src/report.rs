//! The JSON test-report document and the CLI naming of statistics, methods,
//! and schemes.

use icmtest_core::ica::{GFunc, IcaMethod};
use icmtest_core::resampling::{PipelineMethod, Scheme, TestReport};
use icmtest_core::stats::{ScoreSpec, StatisticFamily, StatisticSpec, WeightKernel, WeightKind};
use serde::Serialize;

/// Report written by `test` and embedded by `pipeline`. Key order is fixed
/// for diffing.
#[derive(Debug, Serialize)]
pub struct TestReportDoc {
    pub statistic: f64,
    pub family: &'static str,
    pub weight: Option<&'static str>,
    pub gamma: Option<f64>,
    pub score: &'static str,
    pub p_value: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub scheme: &'static str,
    pub ica: String,
    pub converged: bool,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub elapsed_ms: u64,
    pub version: &'static str,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn family_name(family: StatisticFamily) -> &'static str {
    match family {
        StatisticFamily::Cf => "cf",
        StatisticFamily::CfRank => "cf-rank",
        StatisticFamily::VdwReference => "vdw-reference",
        StatisticFamily::DistCov => "dcov",
    }
}

pub fn score_name(score: ScoreSpec) -> &'static str {
    match score {
        ScoreSpec::Raw => "raw",
        ScoreSpec::Identity => "identity",
        ScoreSpec::VanDerWaerden => "vdw",
    }
}

pub fn weight_name(kind: WeightKind) -> &'static str {
    match kind {
        WeightKind::Gaussian => "gaussian",
        WeightKind::Laplace => "laplace",
    }
}

impl TestReportDoc {
    pub fn from_report(report: &TestReport, n: usize, p: usize, elapsed_ms: u64) -> Self {
        TestReportDoc {
            statistic: report.statistic.value,
            family: family_name(report.statistic.family),
            weight: report.statistic.weight.map(|w| weight_name(w.kind)),
            gamma: report.statistic.weight.map(|w| w.gamma),
            score: score_name(report.statistic.score),
            p_value: report.p_value,
            m: report.m_used,
            scheme: scheme_name(report.scheme),
            ica: report.method.to_string(),
            converged: report.converged,
            seed: report.seed,
            n,
            p,
            elapsed_ms,
            version: VERSION,
        }
    }

    pub fn render(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

pub fn scheme_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Permutation => "permutation",
        Scheme::Bootstrap => "bootstrap",
    }
}

/// Roster names accepted by `--stat`.
pub const STAT_NAMES: &[&str] = &[
    "gauss",
    "laplace",
    "rank-gauss",
    "rank-laplace",
    "vdw-gauss",
    "vdw-ref",
    "dcov",
];

/// Maps a roster name and kernel parameter to a validated spec.
pub fn parse_stat(name: &str, gamma: f64) -> Option<StatisticSpec> {
    let (family, kind, score) = match name {
        "gauss" => (StatisticFamily::Cf, WeightKind::Gaussian, ScoreSpec::Raw),
        "laplace" => (StatisticFamily::Cf, WeightKind::Laplace, ScoreSpec::Raw),
        "rank-gauss" => (
            StatisticFamily::CfRank,
            WeightKind::Gaussian,
            ScoreSpec::Identity,
        ),
        "rank-laplace" => (
            StatisticFamily::CfRank,
            WeightKind::Laplace,
            ScoreSpec::Identity,
        ),
        "vdw-gauss" => (
            StatisticFamily::CfRank,
            WeightKind::Gaussian,
            ScoreSpec::VanDerWaerden,
        ),
        "vdw-ref" => (
            StatisticFamily::VdwReference,
            WeightKind::Gaussian,
            ScoreSpec::VanDerWaerden,
        ),
        "dcov" => (StatisticFamily::DistCov, WeightKind::Gaussian, ScoreSpec::Raw),
        _ => return None,
    };
    // Every roster combination is valid by construction.
    StatisticSpec::new(family, WeightKernel::new(kind, gamma), score).ok()
}

pub const ICA_NAMES: &[&str] = &["fastica-tanh", "fastica-pow3", "fobi", "jade", "oracle"];

pub fn parse_ica(name: &str) -> Option<PipelineMethod> {
    match name {
        "fobi" => Some(PipelineMethod::Ica(IcaMethod::Fobi)),
        "jade" => Some(PipelineMethod::Ica(IcaMethod::Jade)),
        "fastica-tanh" => Some(PipelineMethod::Ica(IcaMethod::FastIca(GFunc::Tanh))),
        "fastica-pow3" => Some(PipelineMethod::Ica(IcaMethod::FastIca(GFunc::Pow3))),
        "oracle" => Some(PipelineMethod::Oracle),
        _ => None,
    }
}

pub fn parse_scheme(name: &str) -> Option<Scheme> {
    match name {
        "perm" | "permutation" => Some(Scheme::Permutation),
        "boot" | "bootstrap" => Some(Scheme::Bootstrap),
        _ => None,
    }
}
