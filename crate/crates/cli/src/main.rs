use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noisebound_cli::{exit_code, run_custom, run_preset, run_qsl_report, CliError, EnsembleOverrides, PresetName};
use noisebound_core::sde::StepperKind;

/// Monte Carlo checks of fidelity bounds for noisy quantum control.
///
/// Exit codes: 0 all checks passed, 1 a statistical check failed,
/// 2 usage or config error, 3 noise or dimension validation failed,
/// 4 I/O error.
#[derive(Parser)]
#[command(name = "noisebound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep gamma for a built-in experiment (fig1a, fig1b, fig2a, fig2b).
    Preset {
        name: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Sweep gamma for a model described in a config file.
    Custom {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Quantum speed limit report for a built-in experiment.
    Qsl {
        name: String,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args)]
struct Opts {
    /// Comma-separated, strictly increasing gamma values [default: 0.1,0.2,...,1.5].
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Trajectories per gamma [default: 10000].
    #[arg(long)]
    n_traj: Option<usize>,
    /// Time step [default: T/2000].
    #[arg(long)]
    dt: Option<f64>,
    /// Master seed; falls back to $NOISEBOUND_SEED, then a fixed constant.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["unitary", "em"])]
    stepper: Option<String>,
    /// Control amplitude u of the built-in experiments.
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    /// Worker threads [default: all cores]. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// CSV destination [default: standard output, summary on standard error].
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Opts {
    fn overrides(&self) -> Result<EnsembleOverrides, CliError> {
        Ok(EnsembleOverrides {
            gammas: self.gammas.clone(),
            n_traj: self.n_traj,
            dt: self.dt,
            seed: self.seed,
            stepper: self.stepper.as_deref().map(str::parse::<StepperKind>).transpose()?,
        })
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (Command::Preset { opts, .. } | Command::Custom { opts, .. } | Command::Qsl { opts, .. }) = &cli.command;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let out = opts.out.as_deref();
    // keep the CSV alone on stdout when no file is given
    let mut summary: Box<dyn Write + Send> =
        if out.is_some() { Box::new(std::io::stdout()) } else { Box::new(std::io::stderr()) };
    let overrides = opts.overrides()?;
    pool.install(|| match &cli.command {
        Command::Preset { name, .. } => run_preset(name.parse()?, opts.u, overrides, out, &mut summary),
        Command::Custom { config, .. } => run_custom(config, overrides, out, &mut summary),
        Command::Qsl { name, .. } => run_qsl_report(name.parse::<PresetName>()?, opts.u, overrides, out, &mut summary),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(true) => exit_code::SUCCESS,
        Ok(false) => exit_code::CHECK_FAILED,
        Err(e) => {
            eprintln!("noisebound: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
