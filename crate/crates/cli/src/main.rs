//! `qcompare`: design, replay and compare control pulses.

mod compare;
mod design;
mod error;
mod output;
mod simulate;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "qcompare", version, about = "Design and compare control pulses for finite-level quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a designer on a built-in scenario and write a run directory.
    Design(design::DesignArgs),
    /// Propagate a system file under a field file.
    Simulate(simulate::SimulateArgs),
    /// Tabulate completed runs side by side.
    Compare(compare::CompareArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Design(a) => design::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Compare(a) => compare::run(a),
    };
    if let Err(e) = result {
        eprintln!("qcompare: {e}");
        std::process::exit(e.exit_code());
    }
}
