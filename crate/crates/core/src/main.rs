use clap::error::ErrorKind;
use clap::Parser;

use sense_avoid::cli::{self, Cli};

fn main() {
    // Usage errors must exit 64; clap's default exit code (2) is reserved
    // for the collision outcome.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => cli::EXIT_USAGE,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    std::process::exit(cli::execute(cli));
}
