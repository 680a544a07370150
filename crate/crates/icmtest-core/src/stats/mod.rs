//! Test statistics: the closed-form characteristic-function L2 statistic,
//! its rank/scored variants, the van der Waerden reference-contrast variant,
//! and distance covariance.

mod cf;
mod dcov;
mod evaluator;
pub mod normal;
mod rank;

pub use cf::{t_statistic, t_statistic_rank, t_statistic_vdw_reference};
pub use dcov::{dc_statistic, dcov_pair};
pub use evaluator::{ColumnPermutations, ResampleEvaluator};
pub use rank::{apply_scores, column_ranks};

use core::fmt;

use crate::mat::Mat;
use crate::math;

/// Weight kernel `C`, the characteristic function of the weight density:
/// `C(0) = 1`, even, bounded by one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightKernel {
    pub kind: WeightKind,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    Gaussian,
    Laplace,
}

impl WeightKernel {
    /// Panics if `gamma` is not strictly positive.
    pub fn new(kind: WeightKind, gamma: f64) -> Self {
        assert!(gamma > 0.0 && gamma.is_finite(), "gamma must be positive");
        WeightKernel { kind, gamma }
    }

    pub fn gaussian(gamma: f64) -> Self {
        WeightKernel::new(WeightKind::Gaussian, gamma)
    }

    pub fn laplace(gamma: f64) -> Self {
        WeightKernel::new(WeightKind::Laplace, gamma)
    }

    /// `exp(-gamma t^2)` for Gaussian, `1 / (1 + gamma t^2)` for Laplace.
    pub fn eval(&self, t: f64) -> f64 {
        let t2 = t * t;
        match self.kind {
            WeightKind::Gaussian => math::exp(-self.gamma * t2),
            WeightKind::Laplace => 1.0 / (1.0 + self.gamma * t2),
        }
    }
}

/// Rank score function `J`, applied to `r / (n + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreSpec {
    /// No ranking: the statistic works on the values themselves.
    Raw,
    /// Wilcoxon scores `r / (n + 1)`.
    Identity,
    /// Normal scores `Phi^{-1}(r / (n + 1))`.
    VanDerWaerden,
}

impl ScoreSpec {
    pub fn apply(&self, u: f64) -> f64 {
        match self {
            ScoreSpec::Raw => u,
            ScoreSpec::Identity => u,
            ScoreSpec::VanDerWaerden => normal::normal_quantile(u),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatisticFamily {
    /// `T_{n,W}` on the residual values.
    Cf,
    /// `T_{n,W}` on scored ranks.
    CfRank,
    /// Scored-rank empirical CF contrasted against the standard normal CF.
    VdwReference,
    /// Distance covariance summed over each component against the rest.
    DistCov,
}

/// A computed statistic with its provenance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatisticValue {
    pub value: f64,
    pub family: StatisticFamily,
    pub weight: Option<WeightKernel>,
    pub score: ScoreSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StatsError {
    /// The reference-contrast closed form needs a Gaussian weight.
    NonGaussianWeight,
    /// Rank families need an actual score function.
    InvalidScore,
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::NonGaussianWeight => {
                write!(f, "the vdw-reference statistic requires a Gaussian weight")
            }
            StatsError::InvalidScore => {
                write!(f, "rank statistics require an Identity or VanDerWaerden score")
            }
            StatsError::DimensionMismatch { expected, got } => {
                write!(f, "row count mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for StatsError {}

/// Validated choice of statistic family, weight kernel, and score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatisticSpec {
    family: StatisticFamily,
    weight: WeightKernel,
    score: ScoreSpec,
}

impl StatisticSpec {
    pub fn new(
        family: StatisticFamily,
        weight: WeightKernel,
        score: ScoreSpec,
    ) -> Result<Self, StatsError> {
        match family {
            StatisticFamily::Cf => Ok(StatisticSpec {
                family,
                weight,
                score: ScoreSpec::Raw,
            }),
            StatisticFamily::CfRank => {
                if score == ScoreSpec::Raw {
                    return Err(StatsError::InvalidScore);
                }
                Ok(StatisticSpec { family, weight, score })
            }
            StatisticFamily::VdwReference => {
                if weight.kind != WeightKind::Gaussian {
                    return Err(StatsError::NonGaussianWeight);
                }
                Ok(StatisticSpec {
                    family,
                    weight,
                    score: ScoreSpec::VanDerWaerden,
                })
            }
            StatisticFamily::DistCov => Ok(StatisticSpec { family, weight, score }),
        }
    }

    pub fn family(&self) -> StatisticFamily {
        self.family
    }

    pub fn weight(&self) -> WeightKernel {
        self.weight
    }

    /// The kernel, when the family integrates against one.
    pub fn weight_if_used(&self) -> Option<WeightKernel> {
        match self.family {
            StatisticFamily::DistCov => None,
            _ => Some(self.weight),
        }
    }

    pub fn score(&self) -> ScoreSpec {
        self.score
    }

    /// Wraps an already-computed value with this spec's provenance.
    pub fn value_of(&self, value: f64) -> StatisticValue {
        StatisticValue {
            value,
            family: self.family,
            weight: match self.family {
                StatisticFamily::DistCov => None,
                _ => Some(self.weight),
            },
            score: self.score,
        }
    }

    /// Evaluates the statistic on the rows of `z`.
    pub fn evaluate(&self, z: &Mat) -> StatisticValue {
        let value = match self.family {
            StatisticFamily::Cf => t_statistic(z, &self.weight),
            StatisticFamily::CfRank => t_statistic_rank(z, self.score, &self.weight),
            StatisticFamily::VdwReference => {
                // Weight kind was validated at construction.
                t_statistic_vdw_reference(z, &self.weight).expect("validated Gaussian weight")
            }
            StatisticFamily::DistCov => {
                if self.score == ScoreSpec::Raw {
                    dc_statistic(z)
                } else {
                    let scored = apply_scores(&column_ranks(z), self.score, z.nrows());
                    dc_statistic(&scored)
                }
            }
        };
        StatisticValue {
            value,
            family: self.family,
            weight: match self.family {
                StatisticFamily::DistCov => None,
                _ => Some(self.weight),
            },
            score: self.score,
        }
    }
}

/// Exact integer power, used for the `n^p` normalizations.
pub(crate) fn ipow(base: f64, exp: usize) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}
