use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use orka_core::analysis::{fvp_reports_to_csv, mean_var, validate_fvp, FvpModel, FvpValidation};
use orka_core::experiment::{run_experiment, workers_from_env, ExperimentConfig, LogBase, Preset};
use orka_core::sensing::SignalRole;
use orka_core::{OrkaError, SolverKind};

#[derive(Parser)]
#[command(name = "bench", about = "One-bit Kaczmarz recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset experiment; prints the summary table as CSV.
    Run(RunArgs),
    /// Monte Carlo check of the distance average against its theoretical mean.
    ValidateFvp(FvpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// fig1, fig2a, fig2b, fig3a, fig3b, fig4a, fig4b or custom.
    #[arg(long)]
    preset: Option<Preset>,
    /// Structured config mirroring the experiment configuration; flags
    /// given on the command line take precedence.
    #[arg(long)]
    json_config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-trial CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV destination (stdout when omitted).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Pre-quantization noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Solver for the custom preset.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    log_base: Option<LogBaseArg>,
    /// Re-measure each adaptive round.
    #[arg(long)]
    requantize: bool,
    /// Add a wall-time column to the per-trial CSV.
    #[arg(long)]
    timings: bool,
    /// Print the resolved parameters as JSON and exit.
    #[arg(long)]
    dump_plan: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Rka,
    Skm,
    Prskm,
    SketchPrskm,
    BlockSkm,
    Quantile,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Rka => SolverKind::Rka,
            SolverArg::Skm => SolverKind::Skm,
            SolverArg::Prskm => SolverKind::Prskm,
            SolverArg::SketchPrskm => SolverKind::SketchPrskm,
            SolverArg::BlockSkm => SolverKind::BlockSkm,
            SolverArg::Quantile => SolverKind::Quantile,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LogBaseArg {
    Two,
    E,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetArg {
    Dense,
    Sparse,
    Lowrank,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gaussian,
    Dct,
}

#[derive(Args)]
struct FvpArgs {
    #[arg(long, value_enum)]
    set: SetArg,
    /// Total one-bit samples m' = n·m.
    #[arg(long)]
    m_prime: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    model: ModelArg,
    /// Threshold sequences m per row.
    #[arg(long, default_value_t = 1)]
    sequences: usize,
    #[arg(long, default_value_t = 50)]
    repetitions: usize,
    /// Dither half-width; defaults to the dynamic range of each instance.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Signal length for dense and sparse sets.
    #[arg(long, default_value_t = 100)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    sparsity: usize,
    /// Side length of the square low-rank signal.
    #[arg(long, default_value_t = 30)]
    side: usize,
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Report CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.json_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => match args.preset {
            Some(p) => ExperimentConfig::preset(p),
            None => bail!("either --preset or --json-config is required"),
        },
    };
    if let Some(p) = args.preset {
        cfg.preset = p;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(sigma) = args.noise {
        cfg.noise_sigma = Some(sigma);
    }
    if let Some(s) = args.solver {
        cfg.solver = Some(s.into());
    }
    if let Some(b) = args.log_base {
        cfg.log_base = match b {
            LogBaseArg::Two => LogBase::Two,
            LogBaseArg::E => LogBase::E,
        };
    }
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    cfg.requantize |= args.requantize;
    cfg.timings |= args.timings;
    Ok(cfg)
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let cfg = run_config(&args)?;
    if args.dump_plan {
        println!("{}", cfg.plan()?.to_json()?);
        return Ok(ExitCode::SUCCESS);
    }
    match run_experiment(&cfg, workers_from_env()?) {
        Ok(out) => {
            write_or_print(args.summary.as_ref(), &out.summary.to_csv())?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ OrkaError::TooManyAborts { .. }) => {
            eprintln!("bench: {e}");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

fn validate(args: FvpArgs) -> Result<ExitCode> {
    let set = match args.set {
        SetArg::Dense => SignalRole::Dense { d: args.d },
        SetArg::Sparse => SignalRole::Sparse { d: args.d, s: args.sparsity },
        SetArg::Lowrank => SignalRole::LowRank { n1: args.side, n2: args.side, r: args.rank },
    };
    let mut cfg = FvpValidation::new(set, args.m_prime);
    cfg.model = match args.model {
        ModelArg::Gaussian => FvpModel::Gaussian,
        ModelArg::Dct => FvpModel::Dct,
    };
    cfg.sequences = args.sequences;
    cfg.repetitions = args.repetitions;
    cfg.lambda = args.lambda;
    cfg.seed = args.seed;
    let reports = validate_fvp(&cfg)?;
    write_or_print(args.out.as_ref(), &fvp_reports_to_csv(&reports))?;

    let mut devs: Vec<f64> = reports.iter().map(|r| r.deviation).collect();
    devs.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = reports.iter().map(|r| r.t_ave - r.theoretical_mean).collect();
    let (mean_gap, var_gap) = mean_var(&gaps);
    if let Some(median) = devs.get(devs.len() / 2) {
        eprintln!(
            "m'={} repetitions={} median |T_ave - mean|={median:.4e} mean gap={mean_gap:.4e} (se {:.4e})",
            args.m_prime,
            reports.len(),
            (var_gap / reports.len() as f64).sqrt()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::ValidateFvp(args) => validate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bench: {e:#}");
            ExitCode::FAILURE
        }
    }
}
