mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{CliError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "qgraph", version, about = "Spectra, surpluses and Neumann domains of quantum graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues as CSV: n,k,multiplicity,class
    Spectrum(CommonArgs),
    /// Per-record surpluses and star Neumann domains as CSV
    Observables {
        #[command(flatten)]
        common: CommonArgs,
        /// Write every Neumann domain instead of the star domains around interior vertices
        #[arg(long)]
        all_domains: bool,
    },
    /// Statistical report (JSON) and histogram CSVs
    Stats {
        #[command(flatten)]
        common: CommonArgs,
        /// Extra histograms: omega, sigma, N or rho (N and rho need --vertex)
        #[arg(long = "histogram", value_name = "NAME")]
        histograms: Vec<String>,
        /// Vertex for N and rho histograms
        #[arg(long)]
        vertex: Option<usize>,
    },
    /// Property suite over the built-in fixtures
    Verify {
        /// Records per fixture
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, value_name = "DIR")]
        out: Option<std::path::PathBuf>,
        #[arg(long = "tol", value_name = "NAME=VALUE")]
        tolerances: Vec<String>,
        /// Also inject known failures and check they are caught
        #[arg(long)]
        negative_controls: bool,
    },
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Graph JSON file
    #[arg(long, value_name = "FILE", conflicts_with = "family", required_unless_present = "family")]
    pub graph: Option<std::path::PathBuf>,
    /// interval, star, stower, mandarin, tree31 or random-regular
    #[arg(long, value_name = "NAME")]
    pub family: Option<String>,
    /// Family parameters, e.g. loops=2,tails=1
    #[arg(long, value_name = "K=V,...", requires = "family")]
    pub params: Option<String>,
    /// Explicit edge lengths; default is uniform on [0.5, 1.5) drawn from the seed
    #[arg(long, value_name = "L,...", requires = "family")]
    pub lengths: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Eigenvalues in (0, kmax]
    #[arg(long, conflicts_with = "count")]
    pub kmax: Option<f64>,
    /// Number of records (generic records for stats)
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: std::path::PathBuf,
    /// Tolerance override, repeatable
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tolerances: Vec<String>,
    /// Audits: friedlander, local-global, torus
    #[arg(long = "audit", value_name = "NAME[,NAME...]", value_delimiter = ',')]
    pub audits: Vec<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum(common) => {
            let config = RunConfig::resolve(&common)?;
            config.in_pool(|| commands::spectrum(&config))
        }
        Command::Observables { common, all_domains } => {
            let config = RunConfig::resolve(&common)?;
            config.in_pool(|| commands::observables(&config, all_domains))
        }
        Command::Stats {
            common,
            histograms,
            vertex,
        } => {
            let config = RunConfig::resolve(&common)?;
            let requests = commands::parse_histograms(&histograms, vertex, &config)?;
            config.in_pool(|| commands::stats(&config, &requests))
        }
        Command::Verify {
            count,
            workers,
            out,
            tolerances,
            negative_controls,
        } => {
            let (tol, suite) = config::parse_tolerances(&tolerances)?;
            let suite = qgraph::suite::SuiteConfig { count, ..suite };
            config::pool(workers)?.install(|| commands::verify(&suite, tol, out.as_deref(), negative_controls))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
