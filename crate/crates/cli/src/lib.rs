//! Command-line front end: `caprouter <subcommand>` over the library pipeline.

mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command, Overrides};
pub use commands::{BenchFile, DecisionLine, EvalFile};
pub use config::{CliConfig, FileKind, Paths};
pub use error::{CliError, EXIT_NUMERIC, EXIT_USAGE, EXIT_VALIDATION};

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    cfg.apply(cli.seed, &cli.overrides);
    cfg.validate()?;
    let out = cli.out.unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::GenSim => commands::gen_sim(&cfg, &out),
        Command::Supervise => commands::supervise(&cfg, &out),
        Command::TrainStage1 => commands::train_stage1_cmd(&cfg, &out),
        Command::TrainStage2 => commands::train_stage2_cmd(&cfg, &out),
        Command::Route => commands::route(&cfg, &out),
        Command::Eval => commands::eval(&cfg, &out),
        Command::Bench(args) => commands::bench(&cfg, &out, args),
        Command::Gradcheck(args) => commands::gradcheck(&cfg, &out, args),
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit status.
/// Failures also print a `{code, message, context}` JSON line on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{}", e.render());
            let err = CliError::Usage(e.kind().to_string());
            eprintln!("{}", err.record());
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}
