//! Command-line front end for the loop-gas phase-classification pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use commands::{analysis, baseline, cluster, data, qcnn};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "loopgas",
    version,
    about = "Quantum-data phase classification for the toric-code loop gas"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled ground-state dataset for one lattice.
    GenData(data::GenDataArgs),
    /// Compare variational energies and magnetizations against exact diagonalization.
    ValidateEd(data::ValidateEdArgs),
    /// Train the quantum convolutional classifier.
    TrainQcnn(qcnn::TrainQcnnArgs),
    /// Evaluate a saved classifier on a dataset.
    EvalQcnn(qcnn::EvalQcnnArgs),
    /// Two-cluster fidelity k-medoids.
    Qkmeans(cluster::QkmeansArgs),
    /// Classical baselines versus training-set size.
    Baseline(baseline::BaselineArgs),
    /// Flip interval from a labelled CSV.
    Flip(analysis::FlipArgs),
    /// Finite-size extrapolation of transition estimates.
    Fss(analysis::FssArgs),
    /// Collect all command summaries into one table.
    Report(analysis::ReportArgs),
}

/// Runs one command and returns its output directory.
pub fn run(cli: &Cli) -> CliResult<PathBuf> {
    match &cli.command {
        Command::GenData(a) => data::gen_data(a),
        Command::ValidateEd(a) => data::validate_ed(a),
        Command::TrainQcnn(a) => qcnn::train(a),
        Command::EvalQcnn(a) => qcnn::eval(a),
        Command::Qkmeans(a) => cluster::run(a),
        Command::Baseline(a) => baseline::run(a),
        Command::Flip(a) => analysis::flip(a),
        Command::Fss(a) => analysis::fss(a),
        Command::Report(a) => analysis::report(a),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            println!("output: {}", out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run_from_env() -> i32 {
    run_from_args(std::env::args_os())
}
