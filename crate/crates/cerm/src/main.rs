use std::path::PathBuf;
use std::process::ExitCode;

use cerm::commands::{run, write_failure, Command};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cerm", version, about = "Constrained wavelet experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config; defaults are used for missing fields or a missing file argument.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, `out/<subcommand>` by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Geodesic descent towards a point on the unit sphere.
    SphereDemo(Common),
    /// Random-start search for a QMF filter.
    QmfFind(Common),
    /// Reconstruction and energy checks of the periodic wavelet transform.
    DwtRoundtrip(Common),
    /// Finite-difference checks of the wavelet-fit gradients.
    GradCheck(Common),
    /// Fits wavelet-decoded contours to synthetic shapes.
    ContourFit(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::SphereDemo(a) => (Command::SphereDemo, a),
        Sub::QmfFind(a) => (Command::QmfFind, a),
        Sub::DwtRoundtrip(a) => (Command::DwtRoundtrip, a),
        Sub::GradCheck(a) => (Command::GradCheck, a),
        Sub::ContourFit(a) => (Command::ContourFit, a),
    };
    let out = args.out.unwrap_or_else(|| PathBuf::from("out").join(cmd.name()));
    match run(cmd, args.config.as_deref(), args.seed, &out) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.to_json()).unwrap_or_default());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                for f in &report.failures {
                    eprintln!("assertion failed: {f}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Err(w) = write_failure(cmd, &out, &e) {
                eprintln!("could not write failure record: {w:#}");
            }
            ExitCode::from(2)
        }
    }
}
