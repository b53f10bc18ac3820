use clap::Parser;

use extremal_kit::cli;

fn main() {
    if let Err(e) = cli::configure_threads_from_env() {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
    let parsed = cli::Cli::parse();
    std::process::exit(cli::run(parsed));
}
