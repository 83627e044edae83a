use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{self, Method, ReconstructArgs, TrainArgs};
use crate::{CliError, ExperimentConfig};

/// Sparse ISAR imaging: simulation, ADMM and unrolled-network
/// reconstruction, self-supervised training and rank diagnostics.
///
/// Noise levels are set as SNR against the mean power of the sampled echo.
/// ADMM and the network return the sparse iterate Z. Exit codes: 0 success,
/// 1 I/O error, 2 invalid input, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "ssisar", version)]
pub struct Cli {
    /// Experiment configuration (strict JSON); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the experiment and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; falls back to `paths.output`, then `.`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the echo and truth raster of a scene file, or a random dataset.
    Simulate {
        /// Scene JSON: {"scatterers": [{"x", "y", "amp_re", "amp_im"}]}.
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        scene: Option<PathBuf>,
        /// Number of random scenes written as scenes/, echoes/, truths/.
        #[arg(long)]
        random: Option<usize>,
    },
    /// Reconstruct an echo file with one or more methods.
    Reconstruct {
        /// Comma-separated list of rd, admm, net.
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        method: Vec<Method>,
        #[arg(long)]
        echo: PathBuf,
        /// Truth file; enables the metrics CSV and ADMM lambda tuning.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Log display: dB below peak mapped to black (negative).
        #[arg(long, allow_hyphen_values = true)]
        db_floor: Option<f64>,
    },
    /// Train the network on a dataset directory.
    Train {
        /// Dataset directory; falls back to `paths.input`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint path; defaults to <out>/checkpoint.ssin.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Per-scene metrics of RD, ADMM and (with a checkpoint) the network.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Rank of the sampled operator alone and stacked with rotations.
    RankCheck {
        /// Comma-separated rotation angles in degrees.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        angles: Vec<f64>,
        /// Relative singular-value tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Apply the echo denoiser and report noise statistics.
    DenoiseTest {
        #[arg(long)]
        echo: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    let out = cli.out.clone().or_else(|| cfg.paths.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Simulate { scene, random } => match (scene, random) {
            (Some(scene), _) => commands::cmd_simulate(&cfg, &scene, &out, stdout),
            (None, Some(n)) => commands::cmd_simulate_random(&cfg, n, &out, stdout),
            (None, None) => Err(CliError::Validation("simulate needs --scene or --random".into())),
        },
        Command::Reconstruct { method, echo, truth, checkpoint, db_floor } => {
            let args = ReconstructArgs {
                methods: &method,
                echo: &echo,
                truth: truth.as_deref(),
                checkpoint: checkpoint.as_deref(),
                db_floor,
            };
            commands::cmd_reconstruct(&cfg, &args, &out, stdout).map(|_| ())
        }
        Command::Train { data, checkpoint, resume } => {
            let data = data
                .or_else(|| cfg.paths.input.clone())
                .ok_or_else(|| CliError::Validation("train needs --data or paths.input".into()))?;
            let args = TrainArgs { data: &data, checkpoint: checkpoint.as_deref(), resume: resume.as_deref() };
            commands::cmd_train(&cfg, &args, &out, stdout).map(|_| ())
        }
        Command::Eval { data, checkpoint } => commands::cmd_eval(&cfg, &data, checkpoint.as_deref(), stdout).map(|_| ()),
        Command::RankCheck { angles, tol } => commands::cmd_rank_check(&cfg, &angles, tol, &out, stdout).map(|_| ()),
        Command::DenoiseTest { echo, checkpoint } => {
            commands::cmd_denoise_test(&cfg, &echo, checkpoint.as_deref(), &out, stdout).map(|_| ())
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, S>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Validation(e.to_string()))?;
    run(cli, stdout)
}
