//! Oracle-side statistics that need the true mean or the true scale.
//!
//! These are not estimators; they check on simulated data that block
//! t-statistics and self-normalized sums behave as the theory says, and
//! they measure how loud the injected outliers are.

use crate::error::{invalid, Result};
use crate::estimators::{BlockPartition, BlockSummary, Sample};

/// Per-block t-statistics `T_j`, self-normalized sums `Q_j` and
/// root mean squares `V_j` around the true mean.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelfNormalizedStats {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

/// `T_j = (mean_j - mu) / sd_j` (0 when `sd_j = 0`),
/// `V_j^2 = |G_j|^-1 sum (X_i - mu)^2` and `Q_j = (mean_j - mu) / V_j` (0 when `V_j = 0`).
pub fn self_normalized(sample: &Sample, partition: &BlockPartition, true_mu: f64) -> Result<SelfNormalizedStats> {
    if partition.sample_len() != sample.len() {
        return invalid(format!(
            "partition covers {} indices but sample has {} values",
            partition.sample_len(),
            sample.len()
        ));
    }
    let mut out = SelfNormalizedStats::default();
    for range in partition.iter() {
        let block = &sample.values()[range];
        let summary = BlockSummary::of(block);
        let n = block.len() as f64;
        let v = (block.iter().map(|x| (x - true_mu) * (x - true_mu)).sum::<f64>() / n).sqrt();
        let gap = summary.mean - true_mu;
        out.t.push(if summary.sd > 0.0 { gap / summary.sd } else { 0.0 });
        // Rounding can push |gap| a hair above v; Cauchy-Schwarz says it cannot.
        out.q.push(if v > 0.0 { (gap / v).clamp(-1.0, 1.0) } else { 0.0 });
        out.v.push(v);
    }
    Ok(out)
}

/// `f(z) = z / sqrt(1 - z^2)`, mapping a self-normalized sum to the t-statistic.
pub fn t_from_q(q: f64) -> f64 {
    q / (1.0 - q * q).sqrt()
}

/// `1 + min_j W_j (inlier mean_j - outlier mean_j)^2 / (n_j sigma^2)` over
/// blocks with `W_j > 0` outliers. `None` when no block holds an outlier.
///
/// A block made only of outliers has no inlier mean and is skipped.
pub fn alpha_of_outliers(sample: &Sample, partition: &BlockPartition, true_sigma: f64) -> Result<Option<f64>> {
    let Some(mask) = sample.outlier_mask() else {
        return invalid("outlier magnitude needs a sample with an outlier mask");
    };
    if partition.sample_len() != sample.len() {
        return invalid("partition does not cover the sample");
    }
    if !(true_sigma > 0.0) {
        return invalid(format!("true sigma {true_sigma} must be positive"));
    }
    let values = sample.values();
    let mut best: Option<f64> = None;
    for range in partition.iter() {
        let n = range.len() as f64;
        let (mut sum_in, mut count_in, mut sum_out, mut count_out) = (0.0, 0usize, 0.0, 0usize);
        for i in range {
            if mask[i] {
                sum_out += values[i];
                count_out += 1;
            } else {
                sum_in += values[i];
                count_in += 1;
            }
        }
        if count_out == 0 || count_in == 0 {
            continue;
        }
        let gap = sum_in / count_in as f64 - sum_out / count_out as f64;
        let term = count_out as f64 * gap * gap / (n * true_sigma * true_sigma);
        best = Some(best.map_or(term, |b: f64| b.min(term)));
    }
    Ok(best.map(|m| 1.0 + m))
}

/// Empirical exceedance frequency for one deviation level `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailExceedance {
    pub s: f64,
    /// `constant * sigma * sqrt(s / n)`.
    pub bound: f64,
    /// Fraction of errors with `|error| > bound`.
    pub frequency: f64,
    /// Sub-Gaussian reference level `2 exp(-s)`.
    pub reference: f64,
}

/// For each `s`, the fraction of `errors` exceeding `constant * sigma * sqrt(s / n)`.
pub fn tail_quantile_check(
    errors: &[f64],
    sigma: f64,
    n: usize,
    s_grid: &[f64],
    constant: f64,
) -> Result<Vec<TailExceedance>> {
    if errors.is_empty() {
        return invalid("tail check needs at least one error");
    }
    if n == 0 {
        return invalid("sample size must be positive");
    }
    if let Some(s) = s_grid.iter().find(|s| !(**s >= 0.0)) {
        return invalid(format!("deviation level {s} must be nonnegative"));
    }
    Ok(s_grid
        .iter()
        .map(|&s| {
            let bound = constant * sigma * (s / n as f64).sqrt();
            let exceed = errors.iter().filter(|e| e.abs() > bound).count();
            TailExceedance {
                s,
                bound,
                frequency: exceed as f64 / errors.len() as f64,
                reference: 2.0 * (-s).exp(),
            }
        })
        .collect())
}
