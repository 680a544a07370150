//! Desk-scale distributional properties of the simulation settings run
//! through the full pipeline.

use icmtest_core::datagen::SettingSpec;
use icmtest_core::ica::{GFunc, IcaMethod};
use icmtest_core::resampling::{warp_speed_study, PipelineMethod, Scheme, StudyPipeline};
use icmtest_core::stats::{ScoreSpec, StatisticFamily, StatisticSpec, WeightKernel};

fn rank_gauss_pipeline() -> StudyPipeline {
    StudyPipeline {
        method: PipelineMethod::Ica(IcaMethod::FastIca(GFunc::Tanh)),
        spec: StatisticSpec::new(
            StatisticFamily::CfRank,
            WeightKernel::gaussian(1.0),
            ScoreSpec::Identity,
        )
        .unwrap(),
        scheme: Scheme::Permutation,
    }
}

#[test]
fn power_decreases_in_degrees_of_freedom() {
    let pipeline = rank_gauss_pipeline();
    let mut rates = Vec::new();
    for df in [1.0, 5.0, 15.0] {
        let setting = SettingSpec::setting2(1000, df, 42);
        let result = warp_speed_study(&setting, &pipeline, 200, 0.05).unwrap();
        rates.push(result.rejection_rate);
    }
    eprintln!("setting 2 rates over df {{1, 5, 15}}: {rates:?}");
    assert!(rates[0] >= rates[1] && rates[1] >= rates[2], "rates {rates:?}");
    assert!(rates[0] > 0.9, "heavy-tail power {rates:?}");
}

#[test]
fn power_increases_in_clayton_dependence() {
    let pipeline = rank_gauss_pipeline();
    let mut rates = Vec::new();
    for omega in [0.0, 0.5, 1.0, 1.5] {
        let setting = SettingSpec::setting3(1000, omega, 43);
        let result = warp_speed_study(&setting, &pipeline, 200, 0.05).unwrap();
        rates.push(result.rejection_rate);
    }
    eprintln!("setting 3 rates over omega {{0, 0.5, 1.0, 1.5}}: {rates:?}");
    for w in rates.windows(2) {
        assert!(w[1] >= w[0], "rates {rates:?}");
    }
    assert!(rates[0] < 0.12, "size at independence {rates:?}");
    assert!(rates[3] > 0.9, "power at strong dependence {rates:?}");
}
