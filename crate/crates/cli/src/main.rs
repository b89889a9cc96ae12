//! `dataext`: sweeps, externality scans and split models from a JSON config.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::Ctx;
use config::RunConfig;
use dataext_core::{Error, ErrorClass};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dataext",
    version,
    about = "Detect and remedy negative data externalities on group performance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grouped dataset
    Synth(Common),
    /// Estimate the risk surface over the allocation grid
    Sweep(Common),
    /// List dominated allocation pairs where more data raised risk
    Detect(Common),
    /// Room for improvement at the reference allocation
    Delta(Common),
    /// Build and evaluate the group-routed split model
    Split(Common),
    /// Plot risk curves and slope scans along one source group
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; never changes outputs
    #[arg(long, env = "DATAEXT_THREADS")]
    threads: Option<usize>,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Compute => 4,
    }
}

fn run(command: &Command) -> Result<String, Error> {
    let (Command::Synth(c)
    | Command::Sweep(c)
    | Command::Detect(c)
    | Command::Delta(c)
    | Command::Split(c)
    | Command::Report(c)) = command;
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let ctx = Ctx {
        cfg,
        out: c.out.clone(),
    };
    ctx.echo_config()?;
    match command {
        Command::Synth(_) => commands::synth(&ctx),
        Command::Sweep(_) => commands::sweep(&ctx),
        Command::Detect(_) => commands::detect_cmd(&ctx),
        Command::Delta(_) => commands::delta_cmd(&ctx),
        Command::Split(_) => commands::split_cmd(&ctx),
        Command::Report(_) => commands::report_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(msg) => {
            print!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let class = e.class();
            let report = serde_json::json!({
                "error": e.kind(),
                "class": format!("{class:?}").to_lowercase(),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            ExitCode::from(exit_code(class))
        }
    }
}
