//! `mhc`: drive two-party hybrid contracts against a local ledger file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mhc_core::ContractSubmitError;

#[derive(Debug, Parser)]
#[command(
    name = "mhc",
    version,
    about = "Two-party hybrid contracts on a local ledger"
)]
struct Cli {
    /// Directory holding config.toml, the default ledger and the key store.
    #[arg(long, env = "MHC_HOME", global = true)]
    home: Option<PathBuf>,
    /// Ledger file (overrides the config).
    #[arg(long, global = true)]
    ledger: Option<PathBuf>,
    /// Key store directory (overrides the config).
    #[arg(long, global = true)]
    keystore: Option<PathBuf>,
    /// Emit one JSON document on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a keypair and store it under NAME.
    Keygen {
        name: String,
        /// 32-byte seed as 64 hex characters, for reproducible keys.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Create the ledger file with a sealed genesis block.
    Init {
        /// TOML file with `[[allocation]]` tables (`account`, `amount`).
        genesis: Option<PathBuf>,
        /// Timestamp source: `wall` or `logical`.
        #[arg(long)]
        clock: Option<String>,
    },
    #[command(subcommand)]
    Contract(ContractCommand),
    /// Pay an invoice on an active contract.
    Pay {
        #[arg(long = "as")]
        actor: String,
        #[arg(long)]
        id: u64,
        #[arg(long)]
        to: String,
        #[arg(long)]
        amount: u64,
        /// Invoice document to fingerprint.
        #[arg(long)]
        invoice: PathBuf,
        #[arg(long)]
        hash: Option<String>,
    },
    /// Show an account balance.
    Balance { account: String },
    /// List ledger events, optionally filtered.
    Events {
        #[arg(long)]
        id: Option<u64>,
        /// Event kind, e.g. `ContractSigned` or `signed`.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Per-contract audit report.
    Audit {
        #[arg(long)]
        id: u64,
    },
    /// Check a document against a contract's registered fingerprint.
    Verify {
        #[arg(long)]
        doc: PathBuf,
        #[arg(long)]
        id: u64,
    },
    /// Export a dispute evidence bundle.
    Evidence {
        #[arg(long)]
        id: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an evidence bundle file offline.
    EvidenceCheck { bundle: PathBuf },
    /// Verify every block of the ledger file.
    ChainVerify,
}

#[derive(Debug, Subcommand)]
enum ContractCommand {
    /// Register a contract document with a counterparty.
    Create {
        #[arg(long = "as")]
        actor: String,
        #[arg(long = "with")]
        counterparty: String,
        #[arg(long)]
        doc: PathBuf,
        #[arg(long)]
        hash: Option<String>,
    },
    /// Counter-sign a pending contract.
    Sign(ActorAndId),
    /// Withdraw consent; the contract deactivates once both parties unsign.
    Unsign(ActorAndId),
    /// Print a contract record.
    Show {
        #[arg(long)]
        id: u64,
    },
    /// List contract ids, optionally only those an account takes part in.
    List {
        #[arg(long)]
        actor: Option<String>,
    },
    /// Whether an account is a participant of a contract.
    IsActor {
        #[arg(long)]
        actor: String,
        #[arg(long)]
        id: u64,
    },
}

#[derive(Debug, Args)]
struct ActorAndId {
    #[arg(long = "as")]
    actor: String,
    #[arg(long)]
    id: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match commands::run(cli) {
        Ok(output) => {
            if json {
                println!("{}", output.json);
            } else {
                print!("{}", output.text);
            }
            if output.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(err) => {
            let code = err
                .downcast_ref::<ContractSubmitError>()
                .and_then(|e| e.rejection())
                .map(|e| e.code());
            if json {
                println!(
                    "{}",
                    serde_json::json!({ "error": format!("{err:#}"), "code": code })
                );
            }
            match code {
                Some(code) => eprintln!("error [{code}]: {err:#}"),
                None => eprintln!("error: {err:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
