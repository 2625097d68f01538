//! Data-driven choice of the number of blocks.
//!
//! The weighted estimator behaves well as long as the harmonic mean of the
//! block spreads (raised to the power `p`) is comparable to the true scale.
//! Here the true scale is replaced by a crude robust estimate
//! ([`robust_sigma`]) and the smallest dyadic `k = 2^i` passing the
//! comparison ([`event_check`]) is selected.

use crate::error::{invalid, Result};
use crate::estimators::{partition, summarize, weighted_mean, BlockSummary, Sample};
use crate::stats;

/// Group size used by [`robust_sigma`]; each group holds 50 disjoint pairs.
pub const SCALE_GROUP_SIZE: usize = 100;

/// Smallest sample accepted by [`robust_sigma`].
pub const MIN_SCALE_SAMPLE: usize = 400;

/// Tuning for the adaptive estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    /// Weight exponent, at least 1.
    pub p: f64,
    /// Assumed upper bound on (number of outliers) / k, in (0, 1).
    pub contamination_bound: f64,
    /// Multiplier of the estimated scale in the data-driven event (80).
    pub threshold_constant: f64,
    /// Multiplier of the true scale in the known-scale event (4).
    pub event_constant_plain: f64,
}

impl AdaptiveConfig {
    pub const DEFAULT_CONTAMINATION_BOUND: f64 = 0.5;
    pub const DEFAULT_THRESHOLD_CONSTANT: f64 = 80.0;
    pub const DEFAULT_EVENT_CONSTANT: f64 = 4.0;

    pub fn new(p: f64, contamination_bound: f64) -> Result<Self> {
        Self {
            p,
            contamination_bound,
            threshold_constant: Self::DEFAULT_THRESHOLD_CONSTANT,
            event_constant_plain: Self::DEFAULT_EVENT_CONSTANT,
        }
        .validated()
    }

    pub fn with_threshold_constant(mut self, c: f64) -> Result<Self> {
        self.threshold_constant = c;
        self.validated()
    }

    pub fn with_event_constant(mut self, c: f64) -> Result<Self> {
        self.event_constant_plain = c;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return invalid(format!("weight exponent p = {} must be >= 1", self.p));
        }
        if !(self.contamination_bound > 0.0 && self.contamination_bound < 1.0) {
            return invalid(format!(
                "contamination bound C = {} must lie in (0, 1)",
                self.contamination_bound
            ));
        }
        for (name, c) in [
            ("threshold constant", self.threshold_constant),
            ("event constant", self.event_constant_plain),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return invalid(format!("{name} {c} must be positive"));
            }
        }
        Ok(self)
    }

    /// Right-hand side of the data-driven event: `(c * sigma_tilde / (1 - C))^p`.
    pub fn adaptive_threshold(&self, sigma_tilde: f64) -> f64 {
        (self.threshold_constant * sigma_tilde / (1.0 - self.contamination_bound)).powf(self.p)
    }

    /// Right-hand side of the known-scale event: `(4 * sigma / (1 - C))^p`.
    pub fn plain_threshold(&self, sigma: f64) -> f64 {
        (self.event_constant_plain * sigma / (1.0 - self.contamination_bound)).powf(self.p)
    }
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            contamination_bound: Self::DEFAULT_CONTAMINATION_BOUND,
            threshold_constant: Self::DEFAULT_THRESHOLD_CONSTANT,
            event_constant_plain: Self::DEFAULT_EVENT_CONSTANT,
        }
    }
}

/// Output of [`robust_sigma`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleEstimate {
    pub sigma_tilde: f64,
    /// Number of 100-element groups that entered the median.
    pub groups_used: usize,
}

/// Median over consecutive 100-element groups of the mean absolute
/// difference of the 50 consecutive disjoint pairs in each group.
///
/// Observations past the last full group are ignored.
pub fn robust_sigma(sample: &Sample) -> Result<ScaleEstimate> {
    let n = sample.len();
    if n < MIN_SCALE_SAMPLE {
        return invalid(format!(
            "robust scale needs at least {MIN_SCALE_SAMPLE} observations, got {n}"
        ));
    }
    let mut group_scales: Vec<f64> = sample
        .values()
        .chunks_exact(SCALE_GROUP_SIZE)
        .map(|group| {
            let total: f64 = group
                .chunks_exact(2)
                .map(|pair| (pair[1] - pair[0]).abs())
                .sum();
            total / (SCALE_GROUP_SIZE / 2) as f64
        })
        .collect();
    let groups_used = group_scales.len();
    Ok(ScaleEstimate {
        sigma_tilde: stats::median_in_place(&mut group_scales),
        groups_used,
    })
}

/// `(k^-1 * sum_j sd_j^-p)^-1`, the harmonic mean of `sd_j^p`.
///
/// Zero when some block has zero spread.
pub fn harmonic_mean_inverse(summaries: &[BlockSummary], p: f64) -> Result<f64> {
    if summaries.is_empty() {
        return invalid("harmonic mean needs at least one block summary");
    }
    if summaries.iter().any(|s| s.sd == 0.0) {
        return Ok(0.0);
    }
    let min_sd = summaries.iter().map(|s| s.sd).fold(f64::INFINITY, f64::min);
    let mean_ratio = summaries
        .iter()
        .map(|s| (min_sd / s.sd).powf(p))
        .sum::<f64>()
        / summaries.len() as f64;
    Ok(min_sd.powf(p) / mean_ratio)
}

/// Whether the harmonic mean of `sd_j^p` stays below `(80 sigma_tilde / (1 - C))^p`.
pub fn event_check(summaries: &[BlockSummary], sigma_tilde: f64, config: &AdaptiveConfig) -> Result<bool> {
    if sigma_tilde.is_nan() || sigma_tilde < 0.0 {
        return invalid(format!("scale estimate {sigma_tilde} must be nonnegative"));
    }
    Ok(harmonic_mean_inverse(summaries, config.p)? <= config.adaptive_threshold(sigma_tilde))
}

/// The same comparison against a known scale `sigma` with constant 4.
pub fn plain_event_check(summaries: &[BlockSummary], sigma: f64, config: &AdaptiveConfig) -> Result<bool> {
    if sigma.is_nan() || sigma < 0.0 {
        return invalid(format!("scale {sigma} must be nonnegative"));
    }
    Ok(harmonic_mean_inverse(summaries, config.p)? <= config.plain_threshold(sigma))
}

/// Smallest `2^i`, `i = 1..=floor(log2 N)`, whose partition passes
/// [`event_check`]. Falls back to 2 when none does.
///
/// With zero-spread blocks counting as passing, the last level always
/// passes: `2^floor(log2 N)` blocks over `N` points include a singleton.
pub fn adaptive_k(sample: &Sample, config: &AdaptiveConfig, sigma_tilde: f64) -> Result<usize> {
    let n = sample.len();
    if n < 2 {
        return invalid(format!("adaptive block count needs N >= 2, got {n}"));
    }
    dyadic_scan(n, |k| {
        let summaries = summarize(sample.values(), &partition(n, k)?)?;
        event_check(&summaries, sigma_tilde, config)
    })
}

/// First `k = 2^i`, `i = 1..=floor(log2 n)`, accepted by `passes`, or 2.
pub fn dyadic_scan<F>(n: usize, mut passes: F) -> Result<usize>
where
    F: FnMut(usize) -> Result<bool>,
{
    if n < 2 {
        return invalid(format!("dyadic scan needs n >= 2, got {n}"));
    }
    for i in 1..=n.ilog2() {
        let k = 1usize << i;
        if passes(k)? {
            return Ok(k);
        }
    }
    // An empty scan gives -inf, and -inf ∨ 1 = 1.
    Ok(2)
}

/// Result of [`adaptive_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOutcome {
    pub estimate: f64,
    /// Selected block count.
    pub k: usize,
    pub sigma_tilde: f64,
}

/// Weighted block-mean estimate with the block count picked by [`adaptive_k`].
pub fn adaptive_estimate(sample: &Sample, config: &AdaptiveConfig) -> Result<AdaptiveOutcome> {
    let sigma_tilde = robust_sigma(sample)?.sigma_tilde;
    let k = adaptive_k(sample, config, sigma_tilde)?;
    let summaries = summarize(sample.values(), &partition(sample.len(), k)?)?;
    Ok(AdaptiveOutcome {
        estimate: weighted_mean(&summaries, config.p)?,
        k,
        sigma_tilde,
    })
}
