//! File formats and command-line front end for `riskgrowth`.
//!
//! Each invocation writes exactly one document to standard output: JSON for
//! every subcommand except `eps-sweep`, which writes CSV. Diagnostics go to
//! standard error. Exit codes are [`EXIT_OK`], [`EXIT_IO`],
//! [`EXIT_INVALID`], [`EXIT_NO_CONVERGENCE`] and [`EXIT_USAGE`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod io;
pub mod json;

pub use io::{load_model, load_policy, load_vector, save_model, save_policy, IoError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
/// Malformed input or a model that fails validation.
pub const EXIT_INVALID: i32 = 2;
/// A solver did not converge; the report is still written.
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

pub const TOOL_VERSION: &str = concat!("riskgrowth ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "riskgrowth", version, about = "Risk-sensitive growth rates of controlled Markov chains")]
pub struct Cli {
    /// Leave out wall-clock timings so reports are byte-stable.
    #[arg(long, global = true)]
    pub no_timings: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check stochasticity and positivity structure.
    Validate { model: PathBuf },

    /// Eigenvalue solve with a primal/dual certificate.
    Solve {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Regularize with this ε when the gain is not strictly positive.
        #[arg(long)]
        eps_fallback: Option<f64>,
    },

    /// Mirror-ascent maximization of the variational objective.
    Variational {
        model: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        iters: usize,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long, default_value_t = 10.0)]
        penalty: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Collatz-Wielandt bracket at a positive vector.
    Bounds {
        model: PathBuf,
        /// JSON array with one positive number per state.
        #[arg(long = "f")]
        f: PathBuf,
    },

    /// Monte Carlo growth estimate under a fixed policy.
    Mc {
        model: PathBuf,
        /// JSON object `{"phi": [[...]]}`.
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        paths: usize,
        #[arg(long, default_value_t = 20)]
        batches: usize,
        #[arg(long, default_value_t = 0)]
        x0: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Write an example model.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },

    /// Regularized growth rates along a decreasing ε grid, as CSV.
    EpsSweep {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        /// `uniform` or comma-separated probabilities, one per state.
        #[arg(long, default_value = "uniform")]
        gamma: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Path counting; one `--adjacency` per action, rows separated by `;`.
    Graph {
        #[arg(long, required = true)]
        adjacency: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Risk-adjusted portfolio growth from a parameter file.
    Portfolio {
        #[arg(long)]
        params: PathBuf,
        /// Grid spacing `1/K` when the file has no explicit grid.
        #[arg(long, default_value_t = 4)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Slowest exit; one `--matrix` per action, rows `;`, entries `,`.
    Exit {
        #[arg(long, required = true)]
        matrix: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        exit_set: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{}", e.render());
            let doc = commands::error_doc("Usage", &e.kind().to_string(), EXIT_USAGE, None);
            let _ = out.write_all(doc.render().as_bytes());
            return EXIT_USAGE;
        }
    };
    let (text, code) = commands::dispatch(&cli, err);
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
    code
}
