use clap::Parser;
use sgdlab::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
