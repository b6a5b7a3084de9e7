mod args;
mod commands;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};

/// Failure of a subcommand: bad arguments exit with 2, anything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(dvcm::Error),
}

impl From<dvcm::Error> for CliError {
    fn from(e: dvcm::Error) -> Self {
        match e {
            dvcm::Error::InvalidParameter(_) | dvcm::Error::UnknownPolyBall(_) => CliError::Usage(e.to_string()),
            other => CliError::Run(other),
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Normals(_) => "normals",
        Command::Curvature(_) => "curvature",
        Command::Features(_) => "features",
        Command::Levelset(_) => "levelset",
        Command::Synth(_) => "synth",
        Command::Sweep(_) => "sweep",
        Command::Oracle(_) => "oracle",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let name = subcommand_name(&cli.command);
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            let mut cmd = Cli::command();
            let usage = cmd
                .find_subcommand_mut(name)
                .map(|s| s.render_usage().to_string())
                .unwrap_or_default();
            eprintln!("error: {msg}\n\n{usage}\n\nFor more information, try 'dvcm {name} --help'.");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
