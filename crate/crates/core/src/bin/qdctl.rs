use clap::Parser;
use qdctl::cli::{run, Args};

fn main() {
    std::process::exit(run(Args::parse()));
}
