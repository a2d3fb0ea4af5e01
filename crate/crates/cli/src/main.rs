//! `nspc`: train, verify, certify and simulate from a `.nsp` specification.
//!
//! Exit codes: 0 success, 1 property refuted or certificate rejected,
//! 2 usage or configuration error, 3 verifier resource limit.

use clap::{Parser, Subcommand};
use nspc::commands::{self, Status};
use nspc::config::ToolConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nspc", version, about = "Proof-carrying neuro-symbolic toolchain")]
struct Cli {
    /// TOML configuration file (paths inside it are relative to its directory).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set train.epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and type-check the specification.
    Check,
    /// Train the network against the training property.
    Train,
    /// Verify the network property and emit a certificate.
    Verify,
    /// Check a certificate with the independent checker.
    CheckCert {
        /// Certificate file (default: <output_dir>/certificate.nspc).
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Query file (default: <output_dir>/queries.txt).
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Network file (default: paths.network).
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Write the verification queries in the text interchange format.
    Export,
    /// Simulate the closed loop from the configured initial state.
    Simulate,
    /// Train, verify, check, bridge and sweep; write the lemma ledger.
    Pipeline,
}

fn run(cli: &Cli) -> anyhow::Result<Status> {
    let cfg = ToolConfig::load(cli.config.as_deref(), &cli.set)?;
    Ok(match &cli.command {
        Command::Check => commands::check(&cfg)?,
        Command::Train => commands::train_cmd(&cfg)?.0,
        Command::Verify => commands::verify_cmd(&cfg, &cfg.required_path("network")?)?.0,
        Command::CheckCert {
            certificate,
            queries,
            network,
        } => {
            let dir = cfg.output_dir();
            let cert = certificate.clone().unwrap_or_else(|| dir.join("certificate.nspc"));
            let queries = queries.clone().unwrap_or_else(|| dir.join("queries.txt"));
            let network = match network {
                Some(n) => n.clone(),
                None => cfg.required_path("network")?,
            };
            commands::check_cert_cmd(&cert, &network, &queries)?.0
        }
        Command::Export => commands::export_cmd(&cfg)?,
        Command::Simulate => commands::simulate_cmd(&cfg)?,
        Command::Pipeline => commands::pipeline_cmd(&cfg)?.0,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
