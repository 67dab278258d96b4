//! `gaussmin` command-line interface.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{
    CampaignArgs, DominanceArgs, FigureArgs, MomentsArgs, SearchArgs, TailsArgs, VerifyArgs, ZonesArgs,
};
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "gaussmin", version, about = "Minimum absolute coordinate of correlated Gaussian vectors")]
struct Cli {
    /// Base seed for every stochastic computation.
    #[arg(long, global = true, env = "GAUSSMIN_SEED", default_value_t = 0)]
    seed: u64,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for output files and run manifests.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify E[M(cos)^2] < E[M(simplex)^2] at n = 4 with interval arithmetic.
    /// Writes certificate.json to --out-dir (default: current directory).
    Verify(VerifyArgs),
    /// Moments E[M^p], exact for the cosine covariance or by Monte Carlo.
    Moments(MomentsArgs),
    /// Tail probabilities P[M >= t].
    Tails(TailsArgs),
    /// Stochastic dominance check between two covariances.
    Dominance(DominanceArgs),
    /// Zone union measures: evenly spaced versus random centers.
    Zones(ZonesArgs),
    /// Optimize f_p or g_t over correlation matrices.
    Search(SearchArgs),
    /// Batch of searches described by a JSON config.
    Campaign(CampaignArgs),
    /// Data files behind the covariance, tail-curve and zone figures.
    Figure(FigureArgs),
}

/// Exit status for a bad flag combination detected after parsing.
pub const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let ctx = commands::Context { seed: cli.seed, format: cli.format, out_dir: cli.out_dir };
    let result = match &cli.command {
        Command::Verify(a) => commands::verify(&ctx, a),
        Command::Moments(a) => commands::moments(&ctx, a),
        Command::Tails(a) => commands::tails(&ctx, a),
        Command::Dominance(a) => commands::dominance(&ctx, a),
        Command::Zones(a) => commands::zones(&ctx, a),
        Command::Search(a) => commands::search(&ctx, a),
        Command::Campaign(a) => commands::campaign(&ctx, a),
        Command::Figure(a) => commands::figure(&ctx, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<commands::UsageError>().is_some()
                || e.downcast_ref::<gaussmin::Error>().is_some_and(|e| !matches!(e, gaussmin::Error::Evaluation(_)));
            if usage {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}
