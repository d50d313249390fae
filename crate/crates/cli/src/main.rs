use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gesture_cli::{commands, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "gesture", version, about = "Co-speech gesture synthesis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic paired corpus.
    GenCorpus(Common),
    /// Train the motion VQVAE.
    TrainVqvae(Common),
    /// Pre-train and optionally fine-tune the latent denoiser.
    TrainDiffusion(Common),
    /// Encode labeled gesture clips into the semantic gesture database.
    BuildDb(Common),
    /// Sample gestures, with semantic injection when a transcript is given.
    Sample(Common),
    /// Compute FGD, BC, diversity and SRGR.
    Evaluate(Common),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match (&common.config, common.seed) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(seed)) => RunConfig::with_seed(seed),
        (None, None) => {
            return Err(CliError::Config("a seed is required: pass --seed or set `seed` in --config".into()))
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&RunConfig, &std::path::Path) -> Result<String, CliError>) = match &cli.command {
        Command::GenCorpus(c) => (c, commands::gen_corpus),
        Command::TrainVqvae(c) => (c, commands::train_vqvae),
        Command::TrainDiffusion(c) => (c, commands::train_diffusion),
        Command::BuildDb(c) => (c, commands::build_db),
        Command::Sample(c) => (c, commands::sample),
        Command::Evaluate(c) => (c, commands::evaluate),
    };
    match load(common).and_then(|cfg| run(&cfg, &common.out)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
