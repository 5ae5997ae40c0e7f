use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod exit;

use exit::Failure;

#[derive(Parser, Debug)]
#[command(name = "pfcycle", version, about = "Design and verify noisy proportional feedback control of k-cycles")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides noise.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides output.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides output.formats, e.g. `csv` or `csv,svg`.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<String>>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the gain, cycle, noise bounds and corridors.
    Design,
    /// Run the ensemble and write trajectories.
    Simulate {
        /// Run the ensemble on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Sweep a parameter and sample the attractor.
    Bifurcate(SweepArgs),
    /// Run the ensemble and check it against the design.
    Verify,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// c, nu, ell1 or ell2
    #[arg(long)]
    param: Option<String>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::usage("--config <path> is required"))?;
    let mut cfg = commands::load(path)?;
    commands::apply_overrides(&mut cfg, cli.seed, cli.out.as_deref(), cli.format.as_deref())?;
    if let Command::Bifurcate(s) = &cli.command {
        commands::apply_sweep(&mut cfg, s.param.as_deref(), s.from, s.to, s.points)?;
    }
    if cli.dump_config {
        print!("{}", cfg.to_toml_string().map_err(Failure::from)?);
        return Ok(());
    }
    match cli.command {
        Command::Design => commands::design(&cfg),
        Command::Simulate { serial } => commands::simulate(&cfg, serial),
        Command::Bifurcate(_) => commands::bifurcate(&cfg),
        Command::Verify => commands::verify(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
