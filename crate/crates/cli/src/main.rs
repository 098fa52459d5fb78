mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "topoarray",
    version,
    about = "Topological edge physics of subwavelength emitter arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Check a config file and print the effective settings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const VALIDATION: u8 = 2;
    pub const NUMERICAL: u8 = 3;

    pub fn validation(message: String) -> Self {
        Self {
            code: Self::VALIDATION,
            message,
        }
    }

    pub fn io(message: String) -> Self {
        Self { code: 1, message }
    }
}

impl From<topoarray::Error> for Failure {
    fn from(e: topoarray::Error) -> Self {
        let code = match &e {
            e if e.is_numerical() => Self::NUMERICAL,
            topoarray::Error::Io(_) | topoarray::Error::Json(_) => 1,
            _ => Self::VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn execute(args: RunArgs) -> Result<(), Failure> {
    let cfg = RunConfig::load(&args.config)?.with_seed(args.seed);
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| {
            Failure::validation("no output directory: pass --out or set `out`".into())
        })?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Failure::validation("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::io(format!("thread pool: {e}")))?;
    }
    run::run(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = matches!(&cli.command, Command::Run(a) if a.verbose);
    env_logger::Builder::new()
        .filter_level(if verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    let result = match cli.command {
        Command::Run(args) => execute(args),
        Command::Validate { config } => RunConfig::load(&config).map(|cfg| {
            println!("OK: {}", cfg.experiment());
            println!(
                "{}",
                serde_json::to_string_pretty(&cfg).expect("config serialises")
            );
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
