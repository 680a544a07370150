//! The simulation harness behind `icmtest simulate`: size/power estimates
//! over a parameter grid, replicated in parallel, reported as CSV.

use std::fmt::Write as _;
use std::time::Instant;

use icmtest_core::datagen::{SettingKind, SettingSpec};
use icmtest_core::resampling::{
    self, PipelineMethod, ResamplingError, ResamplingPlan, Scheme, StudyPipeline,
};
use icmtest_core::rng;
use icmtest_core::stats::StatisticSpec;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub kind: SettingKind,
    /// Grid of df (spherical t) or omega (Clayton) values; one implicit
    /// entry for the independent-mix setting.
    pub params: Vec<f64>,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub alpha: f64,
    pub method: PipelineMethod,
    pub spec: StatisticSpec,
    pub scheme: Scheme,
    pub m: usize,
    pub seed: u64,
    pub warp_speed: bool,
    /// Embed wall-clock means in the CSV (off keeps outputs byte-identical).
    pub timing: bool,
}

#[derive(Clone, Debug)]
pub struct SimRow {
    pub setting: &'static str,
    pub param: Option<f64>,
    pub n: usize,
    pub replications: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub failures: usize,
    pub mean_runtime_ms: f64,
}

fn setting_name(kind: SettingKind) -> &'static str {
    match kind {
        SettingKind::IndepMix => "1",
        SettingKind::SphericalT => "2",
        SettingKind::ClaytonCopula => "3",
    }
}

fn setting_spec(cfg: &SimConfig, param: Option<f64>, n: usize) -> SettingSpec {
    match cfg.kind {
        SettingKind::IndepMix => SettingSpec::setting1(n, cfg.seed),
        SettingKind::SphericalT => SettingSpec::setting2(n, param.unwrap_or(f64::INFINITY), cfg.seed),
        SettingKind::ClaytonCopula => SettingSpec::setting3(n, param.unwrap_or(0.0), cfg.seed),
    }
}

/// Runs the whole grid; one row per (parameter, n).
pub fn run(cfg: &SimConfig) -> Result<Vec<SimRow>, ResamplingError> {
    let params: Vec<Option<f64>> = if cfg.kind == SettingKind::IndepMix {
        vec![None]
    } else {
        cfg.params.iter().map(|&v| Some(v)).collect()
    };
    let mut rows = Vec::new();
    for &param in &params {
        for &n in &cfg.n_list {
            rows.push(run_cell(cfg, param, n)?);
        }
    }
    Ok(rows)
}

fn run_cell(cfg: &SimConfig, param: Option<f64>, n: usize) -> Result<SimRow, ResamplingError> {
    let setting = setting_spec(cfg, param, n);
    let start = Instant::now();
    let (rejections, used, failures) = if cfg.warp_speed {
        let pipeline = StudyPipeline {
            method: cfg.method,
            spec: cfg.spec,
            scheme: cfg.scheme,
        };
        let result = warp_speed_study_parallel(&setting, &pipeline, cfg.replications, cfg.alpha)?;
        (
            result.rejections,
            result.replications - result.failures,
            result.failures,
        )
    } else {
        let outcomes: Vec<Option<bool>> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|r| {
                let data = setting.sample_replicate(r).ok()?;
                let plan = ResamplingPlan::new(cfg.scheme, cfg.m, rng::derive_seed(cfg.seed, r))
                    .expect("m >= 1 validated by the caller");
                let report = resampling::run_test(&data, cfg.method, &cfg.spec, &plan).ok()?;
                Some(report.p_value <= cfg.alpha)
            })
            .collect();
        let failures = outcomes.iter().filter(|o| o.is_none()).count();
        let rejections = outcomes.iter().filter(|o| **o == Some(true)).count();
        (rejections, cfg.replications - failures, failures)
    };
    let elapsed = start.elapsed().as_millis() as f64;
    Ok(SimRow {
        setting: setting_name(cfg.kind),
        param,
        n,
        replications: used,
        rejections,
        rejection_rate: rejections as f64 / used.max(1) as f64,
        failures,
        mean_runtime_ms: if cfg.timing {
            elapsed / cfg.replications.max(1) as f64
        } else {
            0.0
        },
    })
}

/// Parallel warp-speed study with the same draws and pooling as
/// `resampling::warp_speed_study`.
pub fn warp_speed_study_parallel(
    setting: &SettingSpec,
    pipeline: &StudyPipeline,
    replications: usize,
    alpha: f64,
) -> Result<resampling::StudyResult, ResamplingError> {
    if replications < 100 {
        return Err(ResamplingError::TooFewReplications { got: replications });
    }
    let outcomes: Vec<Option<(f64, f64)>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| resampling::warp_speed_replicate(setting, pipeline, r).ok())
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let mut stats = Vec::with_capacity(replications - failures);
    let mut pool = Vec::with_capacity(replications - failures);
    for outcome in outcomes.into_iter().flatten() {
        stats.push(outcome.0);
        pool.push(outcome.1);
    }
    Ok(resampling::assemble_warp_speed(
        stats,
        pool,
        replications,
        failures,
        alpha,
    ))
}

/// Renders the result table; columns are fixed for downstream tooling.
pub fn render_csv(cfg: &SimConfig, rows: &[SimRow]) -> String {
    let mut out = String::from(
        "setting,param,n,ica,family,weight,gamma,score,scheme,warp_speed,M,alpha,seed,replications,rejections,rejection_rate,failures,mean_runtime_ms\n",
    );
    for row in rows {
        let param = row.param.map_or(String::new(), |v| format!("{v}"));
        let weight = cfg
            .spec
            .weight_if_used()
            .map_or(("", String::new()), |w| {
                (crate::report::weight_name(w.kind), format!("{}", w.gamma))
            });
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.setting,
            param,
            row.n,
            cfg.method,
            crate::report::family_name(cfg.spec.family()),
            weight.0,
            weight.1,
            crate::report::score_name(cfg.spec.score()),
            crate::report::scheme_name(cfg.scheme),
            cfg.warp_speed,
            cfg.m,
            cfg.alpha,
            cfg.seed,
            row.replications,
            row.rejections,
            row.rejection_rate,
            row.failures,
            row.mean_runtime_ms,
        )
        .expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use icmtest_core::stats::{ScoreSpec, StatisticFamily, WeightKernel};

    fn base_config() -> SimConfig {
        SimConfig {
            kind: SettingKind::IndepMix,
            params: vec![],
            n_list: vec![80],
            replications: 120,
            alpha: 0.05,
            method: PipelineMethod::Oracle,
            spec: StatisticSpec::new(
                StatisticFamily::Cf,
                WeightKernel::gaussian(1.0),
                ScoreSpec::Raw,
            )
            .unwrap(),
            scheme: Scheme::Permutation,
            m: 39,
            seed: 11,
            warp_speed: false,
            timing: false,
        }
    }

    #[test]
    fn full_and_warp_speed_sizes_are_sane() {
        let mut cfg = base_config();
        let rows = run(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].rejection_rate < 0.15, "{:?}", rows[0]);

        cfg.warp_speed = true;
        let rows = run(&cfg).unwrap();
        assert!(rows[0].rejection_rate < 0.15, "{:?}", rows[0]);
    }

    #[test]
    fn warp_speed_parallel_matches_serial() {
        let setting = SettingSpec::setting1(60, 5);
        let pipeline = StudyPipeline {
            method: PipelineMethod::Oracle,
            spec: base_config().spec,
            scheme: Scheme::Permutation,
        };
        let serial = resampling::warp_speed_study(&setting, &pipeline, 150, 0.05).unwrap();
        let par = warp_speed_study_parallel(&setting, &pipeline, 150, 0.05).unwrap();
        assert_eq!(serial.rejections, par.rejections);
        assert_eq!(serial.pool_size, par.pool_size);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let mut cfg = base_config();
        cfg.kind = SettingKind::ClaytonCopula;
        cfg.params = vec![0.0, 0.5];
        cfg.n_list = vec![60, 90];
        cfg.replications = 100;
        cfg.warp_speed = true;
        let rows = run(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        let csv = render_csv(&cfg, &rows);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("setting,param,n,"));
    }
}
