mod args;
mod commands;
mod io;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Format, Global};
use commands::Output;
use io::{write_file, CliError, CliResult};

fn emit(g: &Global, out: &Output) -> CliResult<()> {
    let body = match g.format {
        Format::Json => &out.json,
        Format::Text => &out.text,
    };
    match &g.out {
        Some(path) => write_file(path, body),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Input(format!("cannot write standard output: {e}"))),
    }
}

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Input(e.to_string().trim_end().to_string())),
    };
    let result = commands::run(&cli.global, &cli.command).and_then(|out| emit(&cli.global, &out));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Rejected { report, cause }) => {
            let err = match emit(&cli.global, &report) {
                Ok(()) => CliError::Core(cause),
                Err(e) => e,
            };
            fail(&err)
        }
        Err(e) => fail(&e),
    }
}
