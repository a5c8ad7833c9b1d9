use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use gmclab::harness::{self, Experiment, RunConfig};
use gmclab::{integrals, GmcError, Result};

#[derive(Parser)]
#[command(name = "gmclab", version, about = "Monte-Carlo experiments on Fourier coefficients of multiplicative chaos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Second moments, decay envelopes and block maxima of c_n.
    Decay(RunArgs),
    /// Fourth moments of c_n and their log-log slope.
    #[command(name = "fourth_moment", alias = "fourth-moment")]
    FourthMoment(RunArgs),
    /// Rescaled c_n against the mixed-Gaussian limit law.
    #[command(name = "limit_law", alias = "limit-law")]
    LimitLaw(RunArgs),
    /// Riesz energy against the Fourier capacity sum.
    Capacity(RunArgs),
    /// Fejér densities of convolution powers.
    Convolve(RunArgs),
    /// Martingale projections in the interval model.
    #[command(name = "toy_model", alias = "toy-model")]
    ToyModel(RunArgs),
    /// The constant κ(γ), from a config or directly.
    Kappa(KappaArgs),
    /// Re-aggregate a results file.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KappaArgs {
    #[arg(long = "gamma-sq", conflicts_with = "config")]
    gamma_sq: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn run(args: &RunArgs, experiment: Experiment) -> Result<()> {
    let mut cfg = RunConfig::from_file(&args.config, Some(experiment))?;
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.output_path = o.display().to_string();
    }
    cfg.validate()?;
    let outcome = harness::run_experiment(&cfg)?;
    println!("{}", outcome.report.to_json()?);
    if !outcome.failures.is_empty() {
        return Err(GmcError::Numeric(format!(
            "{} of {} replicas failed; see {}",
            outcome.failures.len(),
            cfg.replicas,
            harness::failures_path(cfg.output_path.as_ref()).display()
        )));
    }
    Ok(())
}

fn kappa(args: &KappaArgs) -> Result<()> {
    if let Some(config) = &args.config {
        return run(
            &RunArgs {
                config: config.clone(),
                seed: args.seed,
                workers: args.workers,
                out: args.out.clone(),
            },
            Experiment::Kappa,
        );
    }
    let gamma_sq = args
        .gamma_sq
        .ok_or_else(|| GmcError::Config("give --gamma-sq or --config".into()))?;
    if !(0.0..1.0).contains(&gamma_sq) {
        return Err(GmcError::Config(format!("--gamma-sq must lie in [0, 1), got {gamma_sq}")));
    }
    let gamma = gamma_sq.sqrt();
    let k = integrals::kappa(gamma)?;
    if !k.converged {
        return Err(GmcError::Numeric(format!(
            "κ quadrature did not converge (error estimate {:e})",
            k.abs_error_estimate
        )));
    }
    let closed = integrals::kappa_closed_form(gamma)?;
    println!(
        "{{\"gamma_sq\":{gamma_sq:.16e},\"kappa\":{:.16e},\"abs_error_estimate\":{:.16e},\"closed_form\":{closed:.16e}}}",
        k.value, k.abs_error_estimate
    );
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let (header, records) = harness::read_results(&args.input)?;
    let cfg = header
        .config
        .ok_or_else(|| GmcError::Config("results file carries no configuration".into()))?;
    let rep = harness::aggregate(&cfg, &records)?;
    match args.format {
        Format::Json => println!("{}", rep.to_json()?),
        Format::Csv => print!("{}", rep.to_csv()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Decay(a) => run(a, Experiment::Decay),
        Command::FourthMoment(a) => run(a, Experiment::FourthMoment),
        Command::LimitLaw(a) => run(a, Experiment::LimitLaw),
        Command::Capacity(a) => run(a, Experiment::Capacity),
        Command::Convolve(a) => run(a, Experiment::Convolve),
        Command::ToyModel(a) => run(a, Experiment::ToyModel),
        Command::Kappa(a) => kappa(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gmclab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
