use clap::Parser;

use probselect::cli::{self, Cli};

fn main() {
    std::process::exit(cli::run(Cli::parse()));
}
