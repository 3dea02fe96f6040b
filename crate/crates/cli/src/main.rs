use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdlab_cli::commands::snapshot_table;
use pdlab_cli::{rerun, run, Algo, CliError, CommandSpec, RunConfig};

#[derive(Parser)]
#[command(name = "pdlab", version, about = "Hemispherical perimeter-defense lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file with [game], [train], [nash] and [surface] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,
    /// Dotted override such as `train.total_steps=20000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Play the three equilibrium scenarios on attackers placed on the zero-payoff surface.
    NashVerify(Common),
    /// Export the zero-payoff surface around one defender.
    Surface(Common),
    /// Train a defender team, or evaluate the scripted baseline.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "emfac")]
        algo: Algo,
        /// Earlier run directory (or its train_state.json) to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint without exploration noise.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "emfac")]
        algo: Algo,
        /// Training run directory or checkpoint file.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Also write every step as JSON lines to trace.jsonl.
        #[arg(long)]
        trace: bool,
    },
    /// Train the full learner and its four ablations side by side.
    Ablate(Common),
    /// Repeat a recorded run and compare its outputs byte for byte.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common, earlier: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    if common.config.is_none() {
        if let Some(table) = earlier.map(|p| snapshot_table(p)).transpose()?.flatten() {
            return RunConfig::from_table(table, &common.sets, common.seed);
        }
    }
    RunConfig::load(common.config.as_deref(), &common.sets, common.seed)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::NashVerify(c) => run(CommandSpec::NashVerify, load(&c, None)?, &c.out).map(drop),
        Command::Surface(c) => run(CommandSpec::Surface, load(&c, None)?, &c.out).map(drop),
        Command::Train { common, algo, resume } => {
            let config = load(&common, resume.as_ref())?;
            run(CommandSpec::Train { algo, resume }, config, &common.out).map(drop)
        }
        Command::Eval { common, algo, checkpoint, episodes, trace } => {
            let config = load(&common, checkpoint.as_ref())?;
            let episodes = episodes.unwrap_or(config.train.eval_episodes);
            run(CommandSpec::Eval { algo, checkpoint, episodes, trace }, config, &common.out).map(drop)
        }
        Command::Ablate(c) => run(CommandSpec::Ablate, load(&c, None)?, &c.out).map(drop),
        Command::Rerun { manifest, out } => {
            let files = rerun(&manifest, &out)?;
            for f in files {
                println!("identical  {f}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pdlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
