use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use robustmean::estimators::{estimate, EstimatorSpec, Sample};
use robustmean::harness::{self, ExperimentSpec, OutputFormat, ResultTable};
use robustmean::Error;

#[derive(Debug, Parser)]
#[command(name = "robustmean", version, about = "Variance-weighted block-mean estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the mean of newline-delimited numbers read from a file or stdin.
    Estimate(EstimateArgs),
    /// Run a Monte-Carlo experiment described by a JSON config.
    Simulate(SimulateArgs),
    /// Run the full half-t(4) contamination grid (4 outlier counts x 8 block counts x 4 estimators).
    PaperFigures(PaperFiguresArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorName {
    Weighted,
    Mom,
    Trimmed,
    Adaptive,
}

#[derive(Debug, clap::Args)]
struct EstimateArgs {
    /// Input file; reads standard input when omitted or `-`.
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "weighted")]
    estimator: EstimatorName,
    /// Weight exponent for the weighted and adaptive estimators.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Number of blocks for the weighted and median-of-means estimators.
    #[arg(long)]
    k: Option<usize>,
    /// Contamination proportion for the trimmed mean.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Upper bound on outliers per block count for the adaptive estimator.
    #[arg(long = "C", default_value_t = 0.5)]
    contamination_bound: f64,
}

#[derive(Debug, clap::Args)]
struct OutputArgs {
    /// Output file; writes to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: OutputFormat,
    /// Worker threads.
    #[arg(long, env = "ROBUSTMEAN_JOBS")]
    jobs: Option<usize>,
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, clap::Args)]
struct PaperFiguresArgs {
    #[arg(long, default_value_t = harness::PAPER_REPLICATIONS)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn read_numbers<R: Read>(input: R) -> robustmean::Result<Vec<f64>> {
    let mut values = Vec::new();
    for (lineno, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let value = text
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("line {}: {text:?}: {e}", lineno + 1)))?;
        values.push(value);
    }
    Ok(values)
}

fn run_estimate(args: EstimateArgs) -> robustmean::Result<()> {
    let values = match args.input.as_deref() {
        Some(path) if path != Path::new("-") => read_numbers(std::fs::File::open(path)?)?,
        _ => read_numbers(io::stdin().lock())?,
    };
    let sample = Sample::new(values)?;
    let need_k = || {
        args.k
            .ok_or_else(|| Error::InvalidArgument("--k is required for this estimator".into()))
    };
    let spec = match args.estimator {
        EstimatorName::Weighted => EstimatorSpec::weighted(args.p, need_k()?),
        EstimatorName::Mom => EstimatorSpec::median_of_means(need_k()?),
        EstimatorName::Trimmed => EstimatorSpec::trimmed(args.epsilon),
        EstimatorName::Adaptive => EstimatorSpec::adaptive(args.p, args.contamination_bound),
    };
    println!("{}", estimate(&sample, &spec)?);
    Ok(())
}

fn jobs(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn write_table(table: &ResultTable, output: &OutputArgs) -> robustmean::Result<()> {
    match &output.out {
        Some(path) => harness::emit_results(table, output.format, path),
        None => harness::write_results(table, output.format, &mut io::stdout().lock()),
    }
}

fn run(command: Command) -> robustmean::Result<()> {
    match command {
        Command::Estimate(args) => run_estimate(args),
        Command::Simulate(args) => {
            let spec = ExperimentSpec::from_path(&args.config)?;
            let table = harness::run_experiment(&spec, jobs(args.output.jobs))?;
            write_table(&table, &args.output)
        }
        Command::PaperFigures(args) => {
            let table = harness::run_paper_figures(args.reps, args.seed, jobs(args.output.jobs))?;
            write_table(&table, &args.output)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(problems)) => {
            eprintln!("error: invalid configuration");
            for p in problems {
                eprintln!("  - {p}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
