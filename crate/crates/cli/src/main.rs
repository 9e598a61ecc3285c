//! `bench --config sweep.toml [--algorithms IKS,AMP] [--trials N] [--seed S] [--out file.csv]`

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use turbocs::sweep::{self, SweepConfig};
use turbocs::{Algorithm, Error};

#[derive(Debug, Parser)]
#[command(
    name = "bench",
    version,
    about = "Seeded Monte-Carlo sweeps of the recovery algorithms"
)]
struct Args {
    /// TOML sweep description.
    #[arg(long, required_unless_present = "list_algorithms")]
    config: Option<PathBuf>,
    /// Comma-separated subset, e.g. `IKS,AMP,TMS`.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Summary CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial CSV.
    #[arg(long)]
    raw_out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Print the algorithm names and exit.
    #[arg(long)]
    list_algorithms: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

enum Failure {
    Config(String),
    Io(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            Error::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load(args: &Args) -> Result<SweepConfig, Failure> {
    let path = args.config.as_ref().expect("clap enforces --config");
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut config: SweepConfig =
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(a) = &args.algorithms {
        config.algorithms = a.clone();
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    if let Some(o) = &args.out {
        config.output = Some(o.clone());
    }
    if let Some(o) = &args.raw_out {
        config.raw_output = Some(o.clone());
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    if config.output.is_none() {
        return Err(Failure::Config(
            "no output path: set `output` in the config or pass --out".into(),
        ));
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &Args) -> Result<(), Failure> {
    if args.list_algorithms {
        for alg in Algorithm::ALL {
            println!("{alg}");
        }
        return Ok(());
    }
    let config = load(args)?;
    let rows = sweep::run_sweep(&config)?;
    eprintln!(
        "{} rows written to {}",
        rows.len(),
        config
            .output
            .as_ref()
            .map_or(String::new(), |p| p.display().to_string())
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
