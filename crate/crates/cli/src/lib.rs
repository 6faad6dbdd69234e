//! Command-line front end: reads JSON datasets, dispatches to the solvers and
//! writes canonical JSON reports.
//!
//! Exit codes: 0 on success, 1 on malformed input, 2 when the data admit no
//! valid answer. Set `MT_LOG` (e.g. `MT_LOG=debug`) for progress messages on
//! standard error.

mod commands;
pub mod dataset;
pub mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use mueller_core::json::to_canonical_string;
use mueller_core::solver4::{FourOptions, SixOptions};
use mueller_core::tol::TOL_L;

pub use dataset::Dataset;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mueller",
    version,
    about = "Reconstruct Mueller matrices from Stokes measurements"
)]
struct Cli {
    /// Write the JSON report to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a matrix to a Stokes vector.
    Apply {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        stokes: PathBuf,
    },
    /// Rotation family through each pair at angle gamma.
    Family3 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
    },
    /// Rotation device from two pairs.
    Solve2 {
        #[arg(long)]
        data: PathBuf,
    },
    /// Single-pair Lorentz family: solve for x given y, z, w.
    Family4 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(long, allow_negative_numbers = true)]
        z: f64,
        #[arg(long, allow_negative_numbers = true)]
        w: f64,
    },
    /// Lorentz device from four pairs by multistart damped Newton.
    Solve4 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = FourOptions::default().starts)]
        starts: usize,
        #[arg(long, default_value_t = FourOptions::default().seed)]
        seed: u64,
        /// Worst transitivity residual accepted for a root.
        #[arg(long, default_value_t = TOL_L)]
        tol: f64,
        /// Initial Levenberg-Marquardt damping.
        #[arg(long, default_value_t = FourOptions::default().damping)]
        damping: f64,
    },
    /// Lorentz device from six pairs through the lifted linear system.
    Solve6 {
        #[arg(long)]
        data: PathBuf,
        /// Worst transitivity residual accepted for a candidate.
        #[arg(long, default_value_t = TOL_L)]
        tol: f64,
    },
    /// Quadratic-form report for each pair.
    Diag {
        #[arg(long)]
        data: PathBuf,
    },
    /// Sample matrices that leave a Stokes vector fixed.
    Little {
        #[arg(long)]
        stokes: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Synthetic datasets, or CSV conversion with --from-csv.
    Gen(GenArgs),
    /// Residual table of a matrix against a dataset.
    Verify {
        /// Bare matrix, record with `mueller`, or a solver report.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = TOL_L)]
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// Random devices (`k` and matrix), no pairs.
    Lorentz,
    /// Rotation device with two equally inclined pairs.
    Rotation,
    /// Pairs whose lifted unknowns coincide (default 6).
    Consistent,
    /// Random pairs from one device (default 6).
    Generic,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["kind", "from_csv"])))]
struct GenArgs {
    kind: Option<GenKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    count: Option<usize>,
    /// Also write the generating device to this file.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// CSV with columns in_s0..in_s3, out_s0..out_s3.
    #[arg(long, requires = "to_json")]
    from_csv: Option<PathBuf>,
    /// Emit the converted CSV as a JSON dataset.
    #[arg(long, requires = "from_csv")]
    to_json: bool,
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("MT_LOG"))
        .format_timestamp(None)
        .try_init();
}

fn dispatch(command: &Command) -> Result<serde_json::Value, CliError> {
    match command {
        Command::Apply { matrix, stokes } => commands::apply_cmd(matrix, stokes),
        Command::Family3 { data, gamma } => commands::family3_cmd(data, *gamma),
        Command::Solve2 { data } => commands::solve2_cmd(data),
        Command::Family4 { data, y, z, w } => commands::family4_cmd(data, *y, *z, *w),
        Command::Solve4 {
            data,
            starts,
            seed,
            tol,
            damping,
        } => {
            let opts = FourOptions {
                starts: *starts,
                seed: *seed,
                tol_valid: *tol,
                damping: *damping,
                ..FourOptions::default()
            };
            commands::solve4_cmd(data, &opts)
        }
        Command::Solve6 { data, tol } => {
            let opts = SixOptions {
                tol_valid: *tol,
                ..SixOptions::default()
            };
            commands::solve6_cmd(data, &opts)
        }
        Command::Diag { data } => commands::diag_cmd(data),
        Command::Little { stokes, count, seed } => commands::little_cmd(stokes, *count, *seed),
        Command::Gen(g) => commands::gen_cmd(&commands::GenRequest {
            kind: g.kind,
            seed: g.seed,
            count: g.count,
            truth: g.truth.as_deref(),
            from_csv: g.from_csv.as_deref(),
        }),
        Command::Verify { matrix, data, tol } => commands::verify_cmd(matrix, data, *tol),
    }
}

fn emit(text: &str, output: Option<&PathBuf>, out: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("standard output: {e}"))),
    }
}

/// Runs the CLI on `args` (program name first), writing reports to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    let output = cli.output.as_ref();
    let result = dispatch(&cli.command)
        .and_then(|value| emit(&to_canonical_string(&value).expect("reports serialize"), output, out));
    match result {
        Ok(()) => 0,
        Err(e) => {
            if let Some(report) = e.report() {
                let text = to_canonical_string(&report).expect("reports serialize");
                if let Err(write_err) = emit(&text, output, out) {
                    let _ = writeln!(err, "mueller: {write_err}");
                }
            }
            let _ = writeln!(err, "mueller: {e}");
            e.exit_code()
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
