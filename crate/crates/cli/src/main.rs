use clap::Parser;
use tvflow_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.stdout);
            std::process::exit(outcome.code);
        }
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            std::process::exit(failure.code);
        }
    }
}
