mod cluster;
mod config;
mod error;
mod fit;
mod output;
mod synth;

use clap::{Parser, Subcommand};

/// Smooth nonnegative tensor factorization of multi-site daily load curves.
#[derive(Parser)]
#[command(name = "smooth-ntf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit signatures, thermal activations and site activations to a load panel.
    Fit(fit::FitArgs),
    /// Cluster sites from a fitted C.csv.
    Cluster(cluster::ClusterArgs),
    /// Generate a synthetic panel with known factors.
    Synth(synth::SynthArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => fit::run(args),
        Command::Cluster(args) => cluster::run(args),
        Command::Synth(args) => synth::run(args),
    };
    if let Err(e) = outcome {
        eprintln!("smooth-ntf: {e}");
        std::process::exit(e.exit_code());
    }
}
