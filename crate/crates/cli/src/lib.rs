//! The `g2v` command-line tool as a library: argument definitions, the
//! subcommands, and [`run`], which maps every outcome to an exit status.

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod grid;
pub mod manifest;
pub mod output;

use args::{Cli, Command};
use commands::Context;
use error::{CliError, CliResult};
use output::Output;

fn dispatch(cli: &Cli) -> CliResult<()> {
    let ctx = Context {
        out: Output { pretty: cli.pretty },
        seed: cli.seed,
    };
    match &cli.command {
        Command::Bin(a) => commands::bin::run(&ctx, a),
        Command::Splat(a) => commands::splat::run(&ctx, a),
        Command::Render(a) => commands::render::run(&ctx, a),
        Command::Gradcheck(a) => commands::gradcheck::run(&ctx, a),
        Command::Bench(a) => commands::bench::run(&ctx, a),
        Command::Label(a) => commands::label::run(&ctx, a),
        Command::Query(a) => commands::query::run(&ctx, a),
        Command::Eval(a) => commands::eval::run(&ctx, a),
        Command::Synth(c) => commands::synth::run(&ctx, c),
    }
}

fn threads(cli: &Cli) -> CliResult<usize> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn report(e: CliError) -> i32 {
    eprintln!("{e}");
    e.exit_code()
}

/// Parses `argv` (program name first), runs the subcommand on a dedicated
/// worker pool, and returns the process exit status.
pub fn run(argv: Vec<OsString>) -> i32 {
    let argv = match config::apply_config(argv) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => CliError::Usage(String::new()).exit_code(),
            };
        }
    };
    let result = threads(&cli).and_then(|n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
    });
    match result.and_then(|pool| pool.install(|| dispatch(&cli))) {
        Ok(()) => 0,
        Err(e) => report(e),
    }
}
