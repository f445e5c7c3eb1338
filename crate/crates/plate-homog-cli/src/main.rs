//! Command-line front end of the plate-homog toolkit.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::LoadedConfig;
use output::Output;

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Invalid or unsupported configuration (exit code 2).
    Config(String),
    /// Solver or output failure (exit code 3).
    Solver(String),
}

impl From<plate_homog::Error> for Failure {
    fn from(e: plate_homog::Error) -> Self {
        use plate_homog::Error as E;
        match e {
            E::Geometry(_) | E::Config(_) | E::Coercivity(_) | E::Budget { .. } => Failure::Config(e.to_string()),
            E::Solver(_) | E::PoleProximity { .. } | E::OnSpectrum(_) => Failure::Solver(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "plate-homog", version, about = "Simultaneous homogenization and dimension reduction of high-contrast plates")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the configuration's `output` or `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Effective tensor of the regime.
    Tensor,
    /// Inclusion eigenvalues with weighted means.
    Bloch,
    /// Zhikov function poles and dispersion samples.
    Zhikov,
    /// Limit spectrum with band gaps.
    Spectrum,
    /// Time evolution of the limit system.
    Evolve,
    /// Limit resolvent solve.
    Resolvent,
    /// Fine-scale eigenvalues against the limit spectrum.
    Validate,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot configure threads: {e}")))?;
    }
    let cfg = LoadedConfig::read(path)?;
    let dir = cli.out.clone().or_else(|| cfg.run.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    commands::ensure_dir(&dir)?;
    let out = Output { dir, hash: cfg.hash.clone(), quiet: cli.quiet };
    match cli.command {
        Command::Tensor => commands::tensor(&cfg, &out),
        Command::Bloch => commands::bloch(&cfg, &out),
        Command::Zhikov => commands::zhikov(&cfg, &out),
        Command::Spectrum => commands::spectrum(&cfg, &out),
        Command::Evolve => commands::evolve_cmd(&cfg, &out),
        Command::Resolvent => commands::resolvent(&cfg, &out),
        Command::Validate => commands::validate(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
