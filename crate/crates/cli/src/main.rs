//! `unlinked`: generate data, fit the DLSE, run conditional inference and
//! reproduce the simulation studies.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 fit did not converge.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "unlinked", version, about = "Deconvolution in unlinked linear models")]
pub(crate) struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub(crate) enum Command {
    /// Write a synthetic unlinked dataset (X.csv, Y.csv, meta.json).
    Gen(GenArgs),
    /// Fit the deconvolution least-squares estimator.
    Fit(FitArgs),
    /// Conditional mean, mode and credible interval of Z given responses.
    Infer(InferArgs),
    /// Run a simulation study and write its tables and figures.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug, Clone)]
pub(crate) struct SyntheticArgs {
    /// Simulation setting (a, b, c or d).
    #[arg(long)]
    pub setting: Option<String>,
    /// Sample size for synthetic data.
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed for data generation and fitting.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub(crate) struct DataArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    /// Covariate CSV (one row per unit, optional header).
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Response CSV (one column, optional header).
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Noise standard deviation (Gaussian) or scale (Laplace).
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NoiseArg {
    Gaussian,
    Laplace,
}

#[derive(Args, Debug)]
pub(crate) struct GenArgs {
    #[arg(long)]
    pub setting: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Keep rows aligned with responses instead of shuffling them.
    #[arg(long)]
    pub linked: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub(crate) struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of random starting points.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    /// Optimise every start on the full criterion instead of screening.
    #[arg(long)]
    pub exhaustive: bool,
    /// Output JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FyArg {
    Empirical,
    Gauss,
    Integrated,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IntervalArg {
    Quadrature,
    Importance,
}

#[derive(Args, Debug)]
pub(crate) struct InferArgs {
    /// Data to fit on the fly (ignored with --fit-json or --oracle-gaussian).
    #[arg(long)]
    pub x: Option<PathBuf>,
    #[arg(long)]
    pub y: Option<PathBuf>,
    #[arg(long)]
    pub setting: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: f64,
    /// A previous `fit` output; its beta_hat projects the covariates given by --x.
    #[arg(long)]
    pub fit_json: Option<PathBuf>,
    /// Use the exact density N(0, TAU²) for Z instead of an estimate.
    #[arg(long, value_name = "TAU")]
    pub oracle_gaussian: Option<f64>,
    /// Responses to condition on (one column CSV).
    #[arg(long)]
    pub y0: Option<PathBuf>,
    /// Responses given inline, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub at: Vec<f64>,
    #[arg(long, value_enum, default_value_t = FyArg::Integrated)]
    pub fy: FyArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// KDE bandwidth (default 1.06·sd·n^(-1/8)).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value_t = IntervalArg::Quadrature)]
    pub interval: IntervalArg,
    /// Importance sample size for --interval importance.
    #[arg(long, default_value_t = 100_000)]
    pub n_is: usize,
    /// Directory for per-response conditional density dumps (z, f).
    #[arg(long)]
    pub density_dir: Option<PathBuf>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ExperimentArg {
    Rates,
    Comparison,
    MseGrid,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ScaleArg {
    Desk,
    Full,
}

#[derive(Args, Debug)]
pub(crate) struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub experiment: ExperimentArg,
    #[arg(long)]
    pub setting: Option<String>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    pub scale: ScaleArg,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub rep_offset: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sigma2_list: Option<Vec<f64>>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub reference_size: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub fy: Option<FyArg>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// JSON file with ExperimentConfig fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write per-replication values.
    #[arg(long)]
    pub records: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match &cli.command {
        Command::Gen(a) => commands::gen(a, cli.force),
        Command::Fit(a) => commands::fit(a, cli.force),
        Command::Infer(a) => commands::infer(a, cli.force),
        Command::Experiment(a) => commands::experiment(a, cli.force),
    };
    match outcome {
        Ok(commands::Status::Done) => ExitCode::SUCCESS,
        Ok(commands::Status::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
