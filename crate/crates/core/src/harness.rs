//! Monte-Carlo experiment engine.
//!
//! An [`ExperimentSpec`] fixes the data distribution, the contamination, a
//! grid of block counts and a list of estimators. Every replication draws
//! one contaminated sample from seeds derived from `(base_seed, r)` and
//! evaluates every (estimator, k) cell on it. Replications run on a rayon
//! pool and write into per-replication slots, so the output does not depend
//! on the number of worker threads.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{self, AdaptiveConfig, MIN_SCALE_SAMPLE};
use crate::datagen::{self, purpose, ContaminationSpec, Distribution, DistributionSpec};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    median_of_means, partition, summarize, trimmed_mean, weighted_mean, EstimatorKind, TRIM_SAFETY_MARGIN,
};

/// Version tag expected in JSON experiment configs.
pub const SCHEMA_VERSION: u32 = 1;

/// Block counts of the published simulation grid.
pub const PAPER_K_GRID: [usize; 8] = [25, 50, 75, 100, 125, 150, 175, 200];
/// Outlier counts of the published simulation grid.
pub const PAPER_OUTLIER_COUNTS: [usize; 4] = [0, 50, 100, 150];
pub const PAPER_SAMPLE_SIZE: usize = 2500;
pub const PAPER_REPLICATIONS: usize = 1000;
pub const PAPER_HALF_T_DF: f64 = 4.0;

/// A declarative Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n: usize,
    pub distribution: DistributionSpec,
    pub contamination: ContaminationSpec,
    pub k_grid: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub replications: usize,
    pub base_seed: u64,
}

/// On-disk form of [`ExperimentSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub n: usize,
    pub distribution: Distribution,
    #[serde(default = "ContaminationSpec::none")]
    pub contamination: ContaminationSpec,
    pub k_grid: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub replications: usize,
    pub base_seed: u64,
}

impl ExperimentConfig {
    /// Checks every field and reports all violations at once.
    pub fn into_spec(self) -> Result<ExperimentSpec> {
        let mut problems = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            problems.push(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                self.schema_version
            ));
        }
        let distribution = match DistributionSpec::new(self.distribution) {
            Ok(d) => Some(d),
            Err(e) => {
                problems.push(format!("distribution: {e}"));
                None
            }
        };
        let spec_problems = validate_fields(
            self.n,
            &self.contamination,
            &self.k_grid,
            &self.estimators,
            self.replications,
        );
        problems.extend(spec_problems);
        match (problems.is_empty(), distribution) {
            (true, Some(distribution)) => Ok(ExperimentSpec {
                n: self.n,
                distribution,
                contamination: self.contamination,
                k_grid: self.k_grid,
                estimators: self.estimators,
                replications: self.replications,
                base_seed: self.base_seed,
            }),
            _ => Err(Error::Config(problems)),
        }
    }
}

fn validate_fields(
    n: usize,
    contamination: &ContaminationSpec,
    k_grid: &[usize],
    estimators: &[EstimatorKind],
    replications: usize,
) -> Vec<String> {
    let mut problems = Vec::new();
    if n == 0 {
        problems.push("n: must be positive".to_string());
    }
    if replications == 0 {
        problems.push("replications: must be at least 1".to_string());
    }
    if contamination.count >= n.max(1) {
        problems.push(format!(
            "contamination.count: {} must be smaller than n = {n}",
            contamination.count
        ));
    }
    if !contamination.outlier_value.is_finite() {
        problems.push("contamination.outlier_value: must be finite".to_string());
    }
    if k_grid.is_empty() {
        problems.push("k_grid: must list at least one block count".to_string());
    }
    for (i, &k) in k_grid.iter().enumerate() {
        if k == 0 || k > n {
            problems.push(format!("k_grid[{i}]: k = {k} must lie in 1..={n}"));
        }
    }
    if estimators.is_empty() {
        problems.push("estimators: must list at least one estimator".to_string());
    }
    for (i, est) in estimators.iter().enumerate() {
        if let Err(e) = est.validate() {
            problems.push(format!("estimators[{i}]: {e}"));
            continue;
        }
        match *est {
            EstimatorKind::Trimmed { epsilon } => {
                let cut = (epsilon * n as f64).floor() as usize + TRIM_SAFETY_MARGIN;
                if 2 * cut >= n {
                    problems.push(format!(
                        "estimators[{i}]: trimming {cut} values per tail leaves nothing of n = {n}"
                    ));
                }
            }
            EstimatorKind::Adaptive { .. } if n < MIN_SCALE_SAMPLE => {
                problems.push(format!(
                    "estimators[{i}]: adaptive estimator needs n >= {MIN_SCALE_SAMPLE}, got {n}"
                ));
            }
            _ => {}
        }
    }
    problems
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        config.into_spec()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            n: self.n,
            distribution: self.distribution.kind(),
            contamination: self.contamination,
            k_grid: self.k_grid.clone(),
            estimators: self.estimators.clone(),
            replications: self.replications,
            base_seed: self.base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let problems = validate_fields(
            self.n,
            &self.contamination,
            &self.k_grid,
            &self.estimators,
            self.replications,
        );
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// The published simulation cell set for one outlier count: half-t(4)
    /// data, N = 2500, the eight-value k grid, MOM, weighted p = 1 and 2, and
    /// the trimmed mean told the true contamination proportion.
    pub fn paper_grid(outliers: usize, replications: usize, base_seed: u64) -> Self {
        let n = PAPER_SAMPLE_SIZE;
        Self {
            n,
            distribution: DistributionSpec::half_t_standardized(PAPER_HALF_T_DF).expect("df > 2"),
            contamination: ContaminationSpec::new(outliers, ContaminationSpec::DEFAULT_OUTLIER_VALUE),
            k_grid: PAPER_K_GRID.to_vec(),
            estimators: vec![
                EstimatorKind::MedianOfMeans,
                EstimatorKind::Weighted { p: 1.0 },
                EstimatorKind::Weighted { p: 2.0 },
                EstimatorKind::Trimmed {
                    epsilon: outliers as f64 / n as f64,
                },
            ],
            replications,
            base_seed,
        }
    }
}

/// One (estimator, k, O) combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub estimator: EstimatorKind,
    pub k: usize,
    pub outliers: usize,
}

/// Raw per-replication errors `estimate - true mean` for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellErrors {
    pub cell: Cell,
    pub errors: Vec<f64>,
}

/// Summary statistics of the errors of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateMetrics {
    pub mean_error: f64,
    pub mean_abs_error: f64,
    /// `sqrt(N)` times the sample standard deviation of the estimates.
    pub rescaled_sd: f64,
    pub max_abs_error: f64,
    pub replications: usize,
}

impl AggregateMetrics {
    pub fn from_errors(errors: &[f64], n: usize) -> Self {
        let r = errors.len();
        assert!(r > 0, "aggregating zero replications");
        let rf = r as f64;
        let mean_error = errors.iter().sum::<f64>() / rf;
        let mean_abs_error = errors.iter().map(|e| e.abs()).sum::<f64>() / rf;
        let max_abs_error = errors.iter().map(|e| e.abs()).fold(0.0, f64::max);
        let sd = if r > 1 {
            let ss: f64 = errors.iter().map(|e| (e - mean_error).powi(2)).sum();
            (ss / (rf - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean_error,
            mean_abs_error,
            rescaled_sd: (n as f64).sqrt() * sd,
            max_abs_error,
            replications: r,
        }
    }
}

/// One output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub cell: Cell,
    pub n: usize,
    pub base_seed: u64,
    pub metrics: AggregateMetrics,
}

/// Aggregated results, sorted by (estimator, p, k, O).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by(row_order);
        Self { rows }
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Adds the rows of `other` and restores the ordering.
    pub fn merge(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
        self.rows.sort_by(row_order);
    }

    pub fn find(&self, estimator: EstimatorKind, k: usize, outliers: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.cell.estimator == estimator && r.cell.k == k && r.cell.outliers == outliers)
    }
}

fn row_order(a: &ResultRow, b: &ResultRow) -> Ordering {
    let (ea, eb) = (&a.cell.estimator, &b.cell.estimator);
    ea.label()
        .cmp(eb.label())
        .then_with(|| match (ea.exponent(), eb.exponent()) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (x, y) => x.is_some().cmp(&y.is_some()),
        })
        .then(a.cell.k.cmp(&b.cell.k))
        .then(a.cell.outliers.cmp(&b.cell.outliers))
}

/// Errors of every replication for one replication index, laid out as
/// `[k index][estimator index]`.
fn run_replication(spec: &ExperimentSpec, r: u64) -> Result<Vec<f64>> {
    let clean = datagen::sample(
        &spec.distribution,
        spec.n,
        datagen::derive_seed(spec.base_seed, purpose::SAMPLE, r),
    )?;
    let sample = datagen::contaminate(
        clean,
        &spec.contamination,
        datagen::derive_seed(spec.base_seed, purpose::CONTAMINATE, r),
    )?;
    let mu = spec.distribution.true_mean();

    // Estimators that ignore k are computed once per replication.
    let mut fixed: Vec<Option<f64>> = vec![None; spec.estimators.len()];
    for (slot, est) in fixed.iter_mut().zip(&spec.estimators) {
        *slot = match *est {
            EstimatorKind::Trimmed { epsilon } => Some(trimmed_mean(&sample, epsilon)?),
            EstimatorKind::Adaptive {
                p,
                contamination_bound,
            } => {
                let config = AdaptiveConfig::new(p, contamination_bound)?;
                Some(adaptive::adaptive_estimate(&sample, &config)?.estimate)
            }
            _ => None,
        };
    }

    let mut errors = Vec::with_capacity(spec.k_grid.len() * spec.estimators.len());
    for &k in &spec.k_grid {
        let summaries = summarize(sample.values(), &partition(spec.n, k)?)?;
        for (est, fixed) in spec.estimators.iter().zip(&fixed) {
            let value = match (*est, fixed) {
                (_, Some(v)) => *v,
                (EstimatorKind::Weighted { p }, None) => weighted_mean(&summaries, p)?,
                (EstimatorKind::MedianOfMeans, None) => median_of_means(&summaries)?,
                _ => unreachable!("k-free estimators are precomputed"),
            };
            errors.push(value - mu);
        }
    }
    Ok(errors)
}

/// Per-cell raw errors of every replication, in `k_grid` then estimator order.
pub fn simulate_errors(spec: &ExperimentSpec, jobs: usize) -> Result<Vec<CellErrors>> {
    spec.validate()?;
    if jobs == 0 {
        return invalid("parallelism must be at least 1");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let per_replication: Vec<Vec<f64>> = pool.install(|| {
        (0..spec.replications as u64)
            .into_par_iter()
            .map(|r| run_replication(spec, r))
            .collect::<Result<_>>()
    })?;

    let mut cells = Vec::with_capacity(spec.k_grid.len() * spec.estimators.len());
    for (ki, &k) in spec.k_grid.iter().enumerate() {
        for (ei, &estimator) in spec.estimators.iter().enumerate() {
            let slot = ki * spec.estimators.len() + ei;
            cells.push(CellErrors {
                cell: Cell {
                    estimator,
                    k,
                    outliers: spec.contamination.count,
                },
                errors: per_replication.iter().map(|rep| rep[slot]).collect(),
            });
        }
    }
    Ok(cells)
}

/// Runs `spec` on `jobs` worker threads and aggregates every cell.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ResultTable> {
    let rows = simulate_errors(spec, jobs)?
        .into_iter()
        .map(|c| ResultRow {
            cell: c.cell,
            n: spec.n,
            base_seed: spec.base_seed,
            metrics: AggregateMetrics::from_errors(&c.errors, spec.n),
        })
        .collect();
    Ok(ResultTable::new(rows))
}

/// The full published grid: every outlier count, 4 estimators, 8 block counts.
pub fn run_paper_figures(replications: usize, base_seed: u64, jobs: usize) -> Result<ResultTable> {
    let mut table = ResultTable::default();
    for outliers in PAPER_OUTLIER_COUNTS {
        table.merge(run_experiment(
            &ExperimentSpec::paper_grid(outliers, replications, base_seed),
            jobs,
        )?);
    }
    Ok(table)
}

/// Output encodings for [`emit_results`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            other => invalid(format!("unknown output format {other:?} (expected csv or jsonl)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Jsonl => "jsonl",
        })
    }
}

pub const CSV_HEADER: &str =
    "estimator,p,k,O,N,replications,mean_error,mean_abs_error,rescaled_sd,max_abs_error,base_seed";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_number(x: f64) -> String {
    if x.is_finite() {
        format_number(x)
    } else {
        "null".to_string()
    }
}

/// Writes `table` to `out`. Fails on an empty table.
pub fn write_results<W: Write>(table: &ResultTable, format: OutputFormat, out: &mut W) -> Result<()> {
    if table.is_empty() {
        return invalid("no result rows to write");
    }
    if format == OutputFormat::Csv {
        writeln!(out, "{CSV_HEADER}")?;
    }
    for row in table.rows() {
        let est = &row.cell.estimator;
        let m = &row.metrics;
        match format {
            OutputFormat::Csv => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                est.label(),
                est.exponent().map(format_number).unwrap_or_default(),
                row.cell.k,
                row.cell.outliers,
                row.n,
                m.replications,
                format_number(m.mean_error),
                format_number(m.mean_abs_error),
                format_number(m.rescaled_sd),
                format_number(m.max_abs_error),
                row.base_seed,
            )?,
            OutputFormat::Jsonl => writeln!(
                out,
                "{{\"estimator\":\"{}\",\"p\":{},\"k\":{},\"O\":{},\"N\":{},\"replications\":{},\
                 \"mean_error\":{},\"mean_abs_error\":{},\"rescaled_sd\":{},\"max_abs_error\":{},\"base_seed\":{}}}",
                est.label(),
                est.exponent().map_or_else(|| "null".to_string(), json_number),
                row.cell.k,
                row.cell.outliers,
                row.n,
                m.replications,
                json_number(m.mean_error),
                json_number(m.mean_abs_error),
                json_number(m.rescaled_sd),
                json_number(m.max_abs_error),
                row.base_seed,
            )?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes `table` to the file at `destination`, replacing it.
pub fn emit_results(table: &ResultTable, format: OutputFormat, destination: impl AsRef<Path>) -> Result<()> {
    if table.is_empty() {
        return invalid("no result rows to write");
    }
    let mut out = BufWriter::new(File::create(destination)?);
    write_results(table, format, &mut out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            n: 400,
            distribution: DistributionSpec::half_t_standardized(4.0).unwrap(),
            contamination: ContaminationSpec::new(8, 1e3),
            k_grid: vec![10, 20],
            estimators: vec![
                EstimatorKind::Weighted { p: 2.0 },
                EstimatorKind::MedianOfMeans,
                EstimatorKind::Trimmed { epsilon: 0.02 },
                EstimatorKind::Weighted { p: 1.0 },
            ],
            replications: 12,
            base_seed: 5,
        }
    }

    #[test]
    fn single_replication_single_block() {
        let spec = ExperimentSpec {
            n: 50,
            distribution: DistributionSpec::standard_normal(),
            contamination: ContaminationSpec::none(),
            k_grid: vec![1],
            estimators: vec![EstimatorKind::MedianOfMeans],
            replications: 1,
            base_seed: 11,
        };
        let table = run_experiment(&spec, 1).unwrap();
        let m = table.rows()[0].metrics;
        let sample = datagen::sample(&spec.distribution, 50, datagen::derive_seed(11, purpose::SAMPLE, 0)).unwrap();
        assert_eq!(m.mean_error, sample.mean());
        assert_eq!(m.mean_abs_error, sample.mean().abs());
        assert_eq!(m.rescaled_sd, 0.0);
    }

    #[test]
    fn aggregate_identities() {
        let errors = [0.5, -1.5, 0.25, 2.0];
        let m = AggregateMetrics::from_errors(&errors, 100);
        assert_eq!(m.mean_error, 0.3125);
        assert_eq!(m.mean_abs_error, 1.0625);
        assert_eq!(m.max_abs_error, 2.0);
        assert!(m.max_abs_error >= m.mean_abs_error && m.mean_abs_error >= m.mean_error.abs());
    }

    #[test]
    fn rows_are_sorted() {
        let table = run_experiment(&small_spec(), 2).unwrap();
        let keys: Vec<(&str, Option<f64>, usize)> = table
            .rows()
            .iter()
            .map(|r| (r.cell.estimator.label(), r.cell.estimator.exponent(), r.cell.k))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("mom", None, 10),
                ("mom", None, 20),
                ("trimmed", None, 10),
                ("trimmed", None, 20),
                ("weighted", Some(1.0), 10),
                ("weighted", Some(1.0), 20),
                ("weighted", Some(2.0), 10),
                ("weighted", Some(2.0), 20),
            ]
        );
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let spec = small_spec();
        let a = simulate_errors(&spec, 1).unwrap();
        let b = simulate_errors(&spec, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_layout() {
        let table = ResultTable::new(vec![ResultRow {
            cell: Cell {
                estimator: EstimatorKind::Weighted { p: 2.0 },
                k: 50,
                outliers: 0,
            },
            n: 2500,
            base_seed: 7,
            metrics: AggregateMetrics::from_errors(&[0.1], 2500),
        }]);
        let mut buf = Vec::new();
        write_results(&table, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "weighted,2.0000000000000000e0,50,0,2500,1,1.0000000000000001e-1,1.0000000000000001e-1,0.0000000000000000e0,1.0000000000000001e-1,7"
        );

        let mut buf = Vec::new();
        write_results(&table, OutputFormat::Jsonl, &mut buf).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(value["estimator"], "weighted");
        assert_eq!(value["O"], 0);
        assert_eq!(value["mean_error"].as_f64(), Some(0.1));
    }

    #[test]
    fn empty_table_is_rejected() {
        let mut buf = Vec::new();
        assert!(write_results(&ResultTable::default(), OutputFormat::Csv, &mut buf).is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MAX] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn config_reports_every_problem() {
        let text = r#"{
            "schema_version": 1, "n": 100,
            "distribution": {"kind": "student_t", "df": 1.5},
            "contamination": {"count": 100, "outlier_value": 1000},
            "k_grid": [10, 200],
            "estimators": [{"kind": "weighted", "p": 0.5}, {"kind": "adaptive", "p": 1, "contamination_bound": 0.5}],
            "replications": 0, "base_seed": 1
        }"#;
        let Err(Error::Config(problems)) = ExperimentSpec::from_json(text) else {
            panic!("expected configuration error");
        };
        let joined = problems.join("\n");
        for field in ["distribution", "contamination.count", "k_grid[1]", "estimators[0]", "estimators[1]", "replications"] {
            assert!(joined.contains(field), "missing {field} in {joined}");
        }
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let mut config = serde_json::to_value(small_spec().to_config()).unwrap();
        config["extra"] = serde_json::json!(1);
        assert!(matches!(
            ExperimentSpec::from_json(&config.to_string()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_round_trip() {
        let spec = small_spec();
        let text = serde_json::to_string(&spec.to_config()).unwrap();
        assert_eq!(ExperimentSpec::from_json(&text).unwrap(), spec);
    }

    #[test]
    fn paper_grid_shape() {
        let spec = ExperimentSpec::paper_grid(150, 3, 1);
        assert_eq!(spec.k_grid.len() * spec.estimators.len(), 32);
        assert_eq!(spec.estimators[3], EstimatorKind::Trimmed { epsilon: 0.06 });
        spec.validate().unwrap();
    }
}
