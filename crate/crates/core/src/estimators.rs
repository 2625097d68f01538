//! Block-mean estimation kernels.
//!
//! A sample of size `N` is cut into `k` contiguous blocks. Every block
//! contributes its mean and its population standard deviation, and the
//! estimators below aggregate those summaries:
//!
//! * [`weighted_mean`]: convex combination of the block means with weights
//!   proportional to `sd^-p`,
//! * [`median_of_means`]: the median of the block means,
//! * [`trimmed_mean`]: the symmetric trimmed mean with a `+5` safety margin
//!   on each side, used as an oracle baseline.
//!
//! [`estimate`] dispatches an [`EstimatorSpec`] to the right kernel.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::adaptive::{self, AdaptiveConfig};
use crate::error::{invalid, Result};
use crate::stats;

/// Extra order statistics removed from each tail by [`trimmed_mean`].
pub const TRIM_SAFETY_MARGIN: usize = 5;

/// Observations plus an optional ground-truth outlier mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    outlier_mask: Option<Vec<bool>>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("sample must contain at least one value");
        }
        Ok(Self {
            values,
            outlier_mask: None,
        })
    }

    /// Builds a sample whose `mask[i]` marks `values[i]` as an injected outlier.
    pub fn with_mask(values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.len() {
            return invalid(format!(
                "outlier mask has length {} but sample has {} values",
                mask.len(),
                values.len()
            ));
        }
        let mut sample = Self::new(values)?;
        sample.outlier_mask = Some(mask);
        Ok(sample)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn outlier_mask(&self) -> Option<&[bool]> {
        self.outlier_mask.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a sample holds at least one value.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of entries flagged in the outlier mask (0 without a mask).
    pub fn outlier_count(&self) -> usize {
        self.outlier_mask
            .as_ref()
            .map_or(0, |m| m.iter().filter(|&&b| b).count())
    }

    /// Arithmetic mean, summed in sorted order like the block summaries.
    pub fn mean(&self) -> f64 {
        BlockSummary::of(&self.values).mean
    }

    pub fn into_parts(self) -> (Vec<f64>, Option<Vec<bool>>) {
        (self.values, self.outlier_mask)
    }
}

/// Disjoint contiguous index ranges covering `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Range<usize>>,
    len: usize,
}

impl BlockPartition {
    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    /// Length of the sample this partition covers.
    pub fn sample_len(&self) -> usize {
        self.len
    }

    pub fn iter(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.blocks.iter().cloned()
    }
}

/// Mean and population standard deviation of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub mean: f64,
    pub sd: f64,
    pub size: usize,
}

impl BlockSummary {
    /// Summarizes a nonempty slice using divisor `len` for the variance.
    ///
    /// Sums run over the sorted values, so the result does not depend on
    /// the order of `values`.
    pub fn of(values: &[f64]) -> Self {
        debug_assert!(!values.is_empty());
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let ss: f64 = sorted.iter().map(|x| (x - mean) * (x - mean)).sum();
        Self {
            mean,
            sd: (ss / n).sqrt(),
            size: values.len(),
        }
    }
}

/// Which estimator to run and with which parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorKind {
    /// Block means weighted by `sd^-p`.
    Weighted { p: f64 },
    /// Median of the block means.
    #[serde(rename = "mom")]
    MedianOfMeans,
    /// Trimmed mean removing `floor(epsilon * N) + 5` values from each tail.
    Trimmed { epsilon: f64 },
    /// Weighted estimator with a data-driven number of blocks.
    Adaptive { p: f64, contamination_bound: f64 },
}

impl EstimatorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EstimatorKind::Weighted { p } => check_exponent(p),
            EstimatorKind::MedianOfMeans => Ok(()),
            EstimatorKind::Trimmed { epsilon } => {
                if (0.0..0.5).contains(&epsilon) {
                    Ok(())
                } else {
                    invalid(format!("trimming proportion {epsilon} not in [0, 0.5)"))
                }
            }
            EstimatorKind::Adaptive {
                p,
                contamination_bound,
            } => {
                check_exponent(p)?;
                AdaptiveConfig::new(p, contamination_bound).map(|_| ())
            }
        }
    }

    /// Short name used in result tables.
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Weighted { .. } => "weighted",
            EstimatorKind::MedianOfMeans => "mom",
            EstimatorKind::Trimmed { .. } => "trimmed",
            EstimatorKind::Adaptive { .. } => "adaptive",
        }
    }

    /// The weight exponent, for the estimators that have one.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            EstimatorKind::Weighted { p } | EstimatorKind::Adaptive { p, .. } => Some(p),
            _ => None,
        }
    }

    /// Whether the estimator reads the block count `k`.
    pub fn uses_blocks(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Weighted { .. } | EstimatorKind::MedianOfMeans
        )
    }
}

/// An estimator together with its block count. `k` is ignored by the
/// trimmed and adaptive estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub k: usize,
}

impl EstimatorSpec {
    pub fn weighted(p: f64, k: usize) -> Self {
        Self {
            kind: EstimatorKind::Weighted { p },
            k,
        }
    }

    pub fn median_of_means(k: usize) -> Self {
        Self {
            kind: EstimatorKind::MedianOfMeans,
            k,
        }
    }

    pub fn trimmed(epsilon: f64) -> Self {
        Self {
            kind: EstimatorKind::Trimmed { epsilon },
            k: 1,
        }
    }

    pub fn adaptive(p: f64, contamination_bound: f64) -> Self {
        Self {
            kind: EstimatorKind::Adaptive {
                p,
                contamination_bound,
            },
            k: 1,
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        invalid(format!("weight exponent p = {p} must be a finite value >= 1"))
    }
}

/// Splits `0..n` into `k` contiguous blocks. The first `n % k` blocks get
/// one extra element.
pub fn partition(n: usize, k: usize) -> Result<BlockPartition> {
    if k == 0 || k > n {
        return invalid(format!("block count k = {k} must lie in 1..={n}"));
    }
    let base = n / k;
    let extra = n % k;
    let mut blocks = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let size = base + usize::from(j < extra);
        blocks.push(start..start + size);
        start += size;
    }
    debug_assert_eq!(start, n);
    Ok(BlockPartition { blocks, len: n })
}

/// Per-block mean and population standard deviation, in partition order.
pub fn block_summaries(sample: &Sample, partition: &BlockPartition) -> Result<Vec<BlockSummary>> {
    summarize(sample.values(), partition)
}

pub(crate) fn summarize(values: &[f64], partition: &BlockPartition) -> Result<Vec<BlockSummary>> {
    if partition.sample_len() != values.len() {
        return invalid(format!(
            "partition covers {} indices but sample has {} values",
            partition.sample_len(),
            values.len()
        ));
    }
    Ok(partition
        .iter()
        .map(|range| BlockSummary::of(&values[range]))
        .collect())
}

/// Normalized weights `sd_j^-p / sum_i sd_i^-p`.
///
/// When some blocks have zero spread the weights are the limit as those
/// spreads go to zero: the zero-spread blocks share the mass equally.
pub fn weights(summaries: &[BlockSummary], p: f64) -> Result<Vec<f64>> {
    if summaries.is_empty() {
        return invalid("weights need at least one block summary");
    }
    check_exponent(p)?;

    let zeros = summaries.iter().filter(|s| s.sd == 0.0).count();
    if zeros > 0 {
        let w = 1.0 / zeros as f64;
        return Ok(summaries
            .iter()
            .map(|s| if s.sd == 0.0 { w } else { 0.0 })
            .collect());
    }

    // Scale by the smallest sd so every raw weight lies in (0, 1].
    let min_sd = summaries.iter().map(|s| s.sd).fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = summaries.iter().map(|s| (min_sd / s.sd).powf(p)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// The variance-weighted block-mean estimator.
pub fn weighted_mean(summaries: &[BlockSummary], p: f64) -> Result<f64> {
    let w = weights(summaries, p)?;
    Ok(w.iter().zip(summaries).map(|(w, s)| w * s.mean).sum())
}

/// Median of the block means (midpoint of the two central values for even `k`).
pub fn median_of_means(summaries: &[BlockSummary]) -> Result<f64> {
    if summaries.is_empty() {
        return invalid("median-of-means needs at least one block summary");
    }
    let mut means: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
    Ok(stats::median_in_place(&mut means))
}

/// Mean of the central order statistics after removing
/// `floor(epsilon * N) + 5` values from each tail.
pub fn trimmed_mean(sample: &Sample, epsilon: f64) -> Result<f64> {
    EstimatorKind::Trimmed { epsilon }.validate()?;
    let n = sample.len();
    let cut = (epsilon * n as f64).floor() as usize + TRIM_SAFETY_MARGIN;
    if 2 * cut >= n {
        return invalid(format!(
            "trimming {cut} values from each tail leaves nothing of {n} observations"
        ));
    }
    let mut sorted = sample.values().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let kept = &sorted[cut..n - cut];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Runs the estimator described by `spec` on `sample` with a fresh partition.
pub fn estimate(sample: &Sample, spec: &EstimatorSpec) -> Result<f64> {
    spec.kind.validate()?;
    match spec.kind {
        EstimatorKind::Weighted { p } => {
            let blocks = partition(sample.len(), spec.k)?;
            weighted_mean(&block_summaries(sample, &blocks)?, p)
        }
        EstimatorKind::MedianOfMeans => {
            let blocks = partition(sample.len(), spec.k)?;
            median_of_means(&block_summaries(sample, &blocks)?)
        }
        EstimatorKind::Trimmed { epsilon } => trimmed_mean(sample, epsilon),
        EstimatorKind::Adaptive {
            p,
            contamination_bound,
        } => {
            let config = AdaptiveConfig::new(p, contamination_bound)?;
            Ok(adaptive::adaptive_estimate(sample, &config)?.estimate)
        }
    }
}
