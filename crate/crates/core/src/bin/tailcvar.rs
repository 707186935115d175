use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tailcvar::harness::{
    emit_results, load_returns_csv, results_csv, run_experiment, sidecar_path, BenchmarkResult,
    ExperimentConfig, ExperimentKind, ThetaSpec,
};
use tailcvar::{
    estimate_extrapolated, is_estimate, rng, sa_report, Error, EstimateReport, LossModel, Method,
    ParetoModel, Result, Sampler, TailLevels,
};

#[derive(Parser)]
#[command(name = "tailcvar", version, about = "CVaR estimation for heavy-tailed losses")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; experiments write CSV here plus a `.json` sidecar.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One CVaR/gradient estimate from a CSV table or a Pareto model.
    Estimate(EstimateArgs),
    /// Naive vs extrapolated RMSE benchmark.
    Compare,
    /// Importance-sampling variance study.
    Variance,
    /// Portfolio optimization experiment.
    Optimize,
    /// Runs whatever experiment the config file describes.
    Bench,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    beta: f64,
    /// Base level; defaults to `beta`.
    #[arg(long)]
    beta0: Option<f64>,
    /// sample_average, importance_sampling or extrapolated.
    #[arg(long, default_value = "sample_average")]
    method: String,
    /// `uniform` or comma-separated weights.
    #[arg(long, default_value = "uniform")]
    theta: String,
    /// `linear`, `squared` or `power:c1,rho,u0`.
    #[arg(long, default_value = "linear")]
    loss: String,
    /// Returns/loss table; one row per observation.
    #[arg(long, conflicts_with = "alpha")]
    csv: Option<PathBuf>,
    /// Tail index of i.i.d. unit Pareto columns to simulate.
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of simulated columns.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Number of simulated rows.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), single_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate(args) => {
            let report = estimate(args, cli.seed.unwrap_or(0))?;
            let json = serde_json::to_string_pretty(&report)? + "\n";
            match &cli.out {
                Some(p) => std::fs::write(p, json).map_err(|e| io_error(p, e)),
                None => {
                    print!("{json}");
                    Ok(())
                }
            }
        }
        Command::Compare => experiment(&cli, &[ExperimentKind::RmseCvar, ExperimentKind::RmseGradient]),
        Command::Variance => experiment(&cli, &[ExperimentKind::VarianceStudy]),
        Command::Optimize => experiment(&cli, &[ExperimentKind::Portfolio]),
        Command::Bench => experiment(&cli, &[]),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn experiment(cli: &Cli, kinds: &[ExperimentKind]) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <json> is required".into()))?;
    let mut config = ExperimentConfig::from_path(path)?;
    if !kinds.is_empty() && !kinds.contains(&config.kind) {
        return Err(Error::Config(format!(
            "{} config given to a command expecting {}",
            config.kind.as_str(),
            kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(" or ")
        )));
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.clone().or_else(|| config.output.clone());
    if let Some(out) = &out {
        if same_file(&sidecar_path(out), path) || same_file(out, path) {
            return Err(Error::Config(format!(
                "output {} would overwrite the config file",
                out.display()
            )));
        }
    }
    let result = run_experiment(&config)?;
    report_failures(&result);
    match out {
        Some(out) => emit_results(&result, &out),
        None => {
            print!("{}", results_csv(&result.cells)?);
            Ok(())
        }
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn report_failures(result: &BenchmarkResult) {
    for c in result.cells.iter().filter(|c| c.failures > 0) {
        eprintln!(
            "warning: beta={} n={} method={}: {} of {} replications failed ({})",
            c.beta,
            c.n,
            c.method,
            c.failures,
            c.failures + c.replications,
            c.failure.as_deref().unwrap_or("unknown")
        );
    }
}

fn estimate(args: &EstimateArgs, seed: u64) -> Result<EstimateReport> {
    let method = Method::parse(&args.method)?;
    let loss = LossModel::parse(&args.loss)?;
    let levels = TailLevels::new(args.beta, args.beta0.unwrap_or(args.beta))?;

    if method == Method::ImportanceSampling {
        let alpha = args.alpha.ok_or(Error::DensityUnavailable)?;
        let model = ParetoModel::iid(alpha, args.dim)?;
        let theta = ThetaSpec::parse(&args.theta)?.resolve(args.dim)?;
        return is_estimate(&model, &theta, &loss, args.n, levels, seed);
    }

    let samples = match (&args.csv, args.alpha) {
        (Some(p), _) => load_returns_csv(p)?,
        (None, Some(alpha)) => {
            if args.n == 0 {
                return Err(Error::InvalidInput("--n must be at least 1".into()));
            }
            ParetoModel::iid(alpha, args.dim)?.sample_with(args.n, &mut rng::seeded(seed))
        }
        (None, None) => {
            return Err(Error::InvalidInput("give --csv <path> or --alpha <index>".into()))
        }
    };
    let theta = ThetaSpec::parse(&args.theta)?.resolve(samples.ncols())?;
    match method {
        Method::Extrapolated => estimate_extrapolated(&samples, &theta, &loss, levels),
        _ => sa_report(&samples, &theta, &loss, levels.beta()),
    }
}
