//! `fusioncell` command-line tool.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "fusioncell",
    version,
    about = "Standard-cell delay and power prediction"
)]
struct Cli {
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
    /// Configuration file used by --print-config.
    #[arg(long, requires = "print_config")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled dataset.
    Gen(commands::GenArgs),
    /// Train one model variant on a dataset.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint and write a metrics report.
    Eval(commands::EvalArgs),
    /// Dump graph-to-layout attention for one cell.
    Attn(commands::AttnArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        _ if cli.print_config => commands::print_config(cli.config.as_deref()),
        Some(Command::Gen(a)) => commands::gen(a),
        Some(Command::Train(a)) => commands::train(a),
        Some(Command::Eval(a)) => commands::eval(a),
        Some(Command::Attn(a)) => commands::attn(a),
        None => Err(anyhow::anyhow!("no command given; see --help")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
