//! Seeded samplers for the test distributions and the point-mass
//! contamination model.
//!
//! Every draw sequence is keyed by a 64-bit seed. Seeds for independent
//! purposes (inlier sample, outlier positions) and replications are derived
//! with [`derive_seed`], so results never depend on the order in which
//! replications are scheduled.

use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Pareto, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::estimators::Sample;

/// Purpose tags mixed into derived seeds.
pub mod purpose {
    pub const SAMPLE: u64 = 0x5341_4d50_4c45; // "SAMPLE"
    pub const CONTAMINATE: u64 = 0x434f_4e54_414d; // "CONTAM"
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `(base_seed, purpose, index)`.
pub fn derive_seed(base_seed: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ purpose) ^ index)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The supported data-generating distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    StudentT { df: f64 },
    /// `(|T| - m) / s` with `T ~ t(df)`, centered and scaled to mean 0, variance 1.
    HalfTStandardized { df: f64 },
    Pareto { shape: f64, scale: f64 },
}

/// A validated distribution with its mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Distribution", into = "Distribution")]
pub struct DistributionSpec {
    kind: Distribution,
    true_mean: f64,
    true_sd: f64,
}

impl TryFrom<Distribution> for DistributionSpec {
    type Error = crate::Error;

    fn try_from(kind: Distribution) -> Result<Self> {
        Self::new(kind)
    }
}

impl From<DistributionSpec> for Distribution {
    fn from(spec: DistributionSpec) -> Self {
        spec.kind
    }
}

/// `E|T|` for `T ~ t(df)`: `2 sqrt(df) Γ((df+1)/2) / (sqrt(π) (df-1) Γ(df/2))`.
pub fn half_t_mean(df: f64) -> f64 {
    let log_ratio = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0);
    2.0 * df.sqrt() * log_ratio.exp() / (PI.sqrt() * (df - 1.0))
}

/// Standard deviation of `|T|` for `T ~ t(df)`.
pub fn half_t_sd(df: f64) -> f64 {
    let m = half_t_mean(df);
    (df / (df - 2.0) - m * m).sqrt()
}

impl DistributionSpec {
    pub fn new(kind: Distribution) -> Result<Self> {
        let (true_mean, true_sd) = match kind {
            Distribution::Normal { mean, sd } => {
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return invalid(format!("normal needs finite mean and sd > 0, got ({mean}, {sd})"));
                }
                (mean, sd)
            }
            Distribution::StudentT { df } => {
                check_df(df)?;
                (0.0, (df / (df - 2.0)).sqrt())
            }
            Distribution::HalfTStandardized { df } => {
                check_df(df)?;
                (0.0, 1.0)
            }
            Distribution::Pareto { shape, scale } => {
                if !(shape > 2.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
                    return invalid(format!(
                        "pareto needs shape > 2 and scale > 0 for a finite variance, got ({shape}, {scale})"
                    ));
                }
                let mean = shape * scale / (shape - 1.0);
                let var = scale * scale * shape / ((shape - 1.0).powi(2) * (shape - 2.0));
                (mean, var.sqrt())
            }
        };
        Ok(Self {
            kind,
            true_mean,
            true_sd,
        })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(Distribution::Normal { mean, sd })
    }

    pub fn standard_normal() -> Self {
        Self::normal(0.0, 1.0).expect("valid normal")
    }

    pub fn student_t(df: f64) -> Result<Self> {
        Self::new(Distribution::StudentT { df })
    }

    pub fn half_t_standardized(df: f64) -> Result<Self> {
        Self::new(Distribution::HalfTStandardized { df })
    }

    pub fn pareto(shape: f64, scale: f64) -> Result<Self> {
        Self::new(Distribution::Pareto { shape, scale })
    }

    pub fn kind(&self) -> Distribution {
        self.kind
    }

    pub fn true_mean(&self) -> f64 {
        self.true_mean
    }

    pub fn true_sd(&self) -> f64 {
        self.true_sd
    }

    /// `n` i.i.d. draws from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self.kind {
            Distribution::Normal { mean, sd } => {
                let d = Normal::new(mean, sd).expect("validated");
                d.sample_iter(rng).take(n).collect()
            }
            Distribution::StudentT { df } => {
                let d = StudentT::new(df).expect("validated");
                d.sample_iter(rng).take(n).collect()
            }
            Distribution::HalfTStandardized { df } => {
                let d = StudentT::new(df).expect("validated");
                let (m, s) = (half_t_mean(df), half_t_sd(df));
                d.sample_iter(rng).take(n).map(|t| (t.abs() - m) / s).collect()
            }
            Distribution::Pareto { shape, scale } => {
                let d = Pareto::new(scale, shape).expect("validated");
                d.sample_iter(rng).take(n).collect()
            }
        }
    }
}

fn check_df(df: f64) -> Result<()> {
    if df > 2.0 && df.is_finite() {
        Ok(())
    } else {
        invalid(format!("degrees of freedom {df} must exceed 2 for a finite variance"))
    }
}

/// Number of entries to overwrite and the value written there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSpec {
    pub count: usize,
    #[serde(default = "ContaminationSpec::default_outlier_value")]
    pub outlier_value: f64,
}

impl ContaminationSpec {
    pub const DEFAULT_OUTLIER_VALUE: f64 = 1e3;

    fn default_outlier_value() -> f64 {
        Self::DEFAULT_OUTLIER_VALUE
    }

    pub fn new(count: usize, outlier_value: f64) -> Self {
        Self {
            count,
            outlier_value,
        }
    }

    pub fn none() -> Self {
        Self::new(0, Self::DEFAULT_OUTLIER_VALUE)
    }
}

/// `n` draws from `dist` using the stream seeded by `seed`.
pub fn sample(dist: &DistributionSpec, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    Sample::new(dist.draw(n, &mut rng_from_seed(seed)))
}

/// Overwrites `spec.count` positions, chosen uniformly without replacement,
/// with `spec.outlier_value` and marks them in the outlier mask.
pub fn contaminate(sample: Sample, spec: &ContaminationSpec, seed: u64) -> Result<Sample> {
    let n = sample.len();
    if spec.count >= n {
        return invalid(format!(
            "cannot replace {} of {n} observations; at least one must stay clean",
            spec.count
        ));
    }
    let (mut values, mask) = sample.into_parts();
    let mut mask = mask.unwrap_or_else(|| vec![false; n]);
    if spec.count > 0 {
        let mut rng = rng_from_seed(seed);
        for i in index::sample(&mut rng, n, spec.count) {
            values[i] = spec.outlier_value;
            mask[i] = true;
        }
    }
    Sample::with_mask(values, mask)
}
