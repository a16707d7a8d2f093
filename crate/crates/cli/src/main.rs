//! `diqkd`: Bell values, local and quantum bounds, entropy bounds and key
//! rates over noise grids, written as CSV.
//!
//! Exit status is 0 on success, 1 when a computation fails and 2 for usage
//! errors.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{read_config, JobConfig, UsageError};

#[derive(Parser, Debug)]
#[command(name = "diqkd", version, about = "Device-independent QKD key-rate jobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Functional value of the degraded protocol behavior per grid point.
    Eval,
    /// Local bound by enumeration of deterministic strategies.
    LocalBound,
    /// NPA upper bound on the functional per efficiency.
    NpaBound,
    /// Lower bound on H(A|E) per grid point.
    EntropyBound,
    /// Key-rate curve over the swept parameter.
    Keyrate,
    /// Zero crossing of the key rate in the swept parameter.
    ScanThreshold,
    /// Multistart search for violations or Bob's key measurement.
    Optimize,
    /// Writes a relaxation in SDPA sparse format.
    ExportSdpa,
}

/// Every option may also be given as `key = value` in the `--config` file;
/// flags win.
#[derive(Args, Debug, Default)]
struct Options {
    /// q4422, q234, q4422-partial or custom.
    #[arg(long, global = true)]
    protocol: Option<String>,
    /// Realization file for the custom protocol.
    #[arg(long, global = true)]
    realization: Option<String>,
    /// i4422, i234, chsh or a functional file.
    #[arg(long, global = true)]
    functional: Option<String>,
    /// Detection efficiency: a value or lo:hi:step.
    #[arg(long, global = true)]
    eta: Option<String>,
    /// Visibility: a value or lo:hi:step.
    #[arg(long, global = true)]
    v: Option<String>,
    /// Range lo:hi:step of the swept parameter.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Swept parameter: eta or v.
    #[arg(long, global = true)]
    sweep: Option<String>,
    /// Relaxation level, such as 2 or 1+AB+AV.
    #[arg(long, global = true)]
    level: Option<String>,
    /// Iteration depth of the entropy program.
    #[arg(long, global = true)]
    k: Option<String>,
    /// Comma-separated monomial families added to the level.
    #[arg(long, global = true)]
    extras: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Worker threads for grid points and search starts.
    #[arg(long, global = true)]
    jobs: Option<String>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Threshold bisection tolerance.
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Search starts.
    #[arg(long, global = true)]
    starts: Option<String>,
    /// Simplex iterations per start.
    #[arg(long, global = true)]
    iterations: Option<String>,
    /// export-sdpa problem: tsirelson or entropy.
    #[arg(long, global = true)]
    problem: Option<String>,
    /// optimize target: violation or key.
    #[arg(long, global = true)]
    target: Option<String>,
    /// optimize family: 4422 or 234.
    #[arg(long, global = true)]
    family: Option<String>,
    /// planar, fourier-phase or commuting-pair.
    #[arg(long, global = true)]
    ansatz: Option<String>,
    /// Search log file.
    #[arg(long, global = true)]
    log: Option<String>,
    /// Certificate file of a single-point entropy bound.
    #[arg(long, global = true)]
    certificate: Option<String>,
    /// Key-value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Options {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("protocol", &self.protocol),
            ("realization", &self.realization),
            ("functional", &self.functional),
            ("eta", &self.eta),
            ("v", &self.v),
            ("grid", &self.grid),
            ("sweep", &self.sweep),
            ("level", &self.level),
            ("k", &self.k),
            ("extras", &self.extras),
            ("seed", &self.seed),
            ("jobs", &self.jobs),
            ("out", &self.out),
            ("tol", &self.tol),
            ("starts", &self.starts),
            ("iterations", &self.iterations),
            ("problem", &self.problem),
            ("target", &self.target),
            ("family", &self.family),
            ("ansatz", &self.ansatz),
            ("log", &self.log),
            ("certificate", &self.certificate),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn run(cli: &Cli) -> anyhow::Result<String> {
    let mut map = match &cli.options.config {
        Some(path) => read_config(path)?,
        None => BTreeMap::new(),
    };
    map.extend(cli.options.flags());
    let cfg = JobConfig::from_map(&map)?;
    match cli.command {
        Command::Eval => commands::eval(&cfg),
        Command::LocalBound => commands::local_bound(&cfg),
        Command::NpaBound => commands::npa_bound(&cfg),
        Command::EntropyBound => commands::entropy_bound(&cfg),
        Command::Keyrate => commands::keyrate(&cfg),
        Command::ScanThreshold => commands::scan_threshold(&cfg),
        Command::Optimize => commands::optimize(&cfg),
        Command::ExportSdpa => commands::export_sdpa_file(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) if e.is::<UsageError>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
