//! Robust mean estimation from block means weighted by their spread.
//!
//! The sample is cut into `k` blocks. Each block mean is weighted
//! proportionally to `sd^-p`, where `sd` is the block's own standard
//! deviation, so blocks hit by outliers (which inflate the spread) are
//! damped while clean blocks are averaged almost uniformly. The resulting
//! estimator is robust to heavy tails and to a fraction of outliers, and on
//! clean data it keeps the asymptotic variance of the sample mean.
//!
//! * [`estimators`]: partitioning, block summaries, the weighted estimator
//!   and the median-of-means and trimmed-mean baselines.
//! * [`adaptive`]: the robust preliminary scale and the data-driven block count.
//! * [`datagen`]: seeded samplers and the point-mass contamination model.
//! * [`diagnostics`]: t-statistics, self-normalized sums and outlier
//!   magnitude, computed against the known truth.
//! * [`harness`]: the Monte-Carlo experiment engine and result files.
//!
//! ```
//! use robustmean::estimators::{estimate, EstimatorSpec, Sample};
//!
//! let mut values: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 100.0 - 0.5).collect();
//! values[10] = 1e6;
//! let sample = Sample::new(values).unwrap();
//! let est = estimate(&sample, &EstimatorSpec::weighted(2.0, 20)).unwrap();
//! assert!(est.abs() < 0.1);
//! ```

pub mod adaptive;
pub mod datagen;
pub mod diagnostics;
mod error;
pub mod estimators;
pub mod harness;
pub mod stats;

pub use error::{Error, Result};

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/blocks.md")]
    mod blocks {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/self_normalized.md")]
    mod self_normalized {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    mod adaptive {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
