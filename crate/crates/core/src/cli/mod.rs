//! Command-line driver. Reports are CSV; outputs are written only after the
//! whole command has succeeded.

mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::{CommandFactory, Parser};

pub use args::Cli;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Io(_) => EXIT_FAILURE,
        _ => EXIT_DOMAIN,
    }
}

/// Parses `argv` and runs the command, writing results to `stdout` and
/// diagnostics to `stderr`. Returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let mut text = e.render().to_string();
            if code == EXIT_USAGE && !text.contains("Usage:") {
                let mut cmd = Cli::command();
                let sub = argv.get(1).and_then(|a| a.to_str()).and_then(|name| cmd.find_subcommand_mut(name).cloned());
                let usage = match sub {
                    Some(s) => {
                        let name = format!("cubemu {}", s.get_name());
                        s.bin_name(name).render_usage()
                    }
                    None => cmd.render_usage(),
                };
                text.push_str(&format!("\n{usage}\n"));
            }
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match commands::dispatch(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
