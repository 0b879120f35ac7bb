//! Command handlers. Each returns both renderings of its result; `main`
//! picks one.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context as _, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use mhc_core::audit::{
    audit_contract, export_evidence, verify_document_link, verify_evidence_bytes,
};
use mhc_core::fingerprint::fingerprint_document;
use mhc_core::identity::KeyStore;
use mhc_core::ledger::{verify_ledger_file, EventData};
use mhc_core::{
    Address, ClockMode, ContractId, ContractLedger, Engine, EventFilter, EventKind, HashAlgorithm,
    Invoice, KeyPair, Ledger, LedgerEvent,
};

use crate::config::{default_home, CliConfig};
use crate::{Cli, Command, ContractCommand};

pub struct Output {
    pub text: String,
    pub json: Value,
    /// False when the command ran but its answer is negative (exit code 1).
    pub success: bool,
}

impl Output {
    fn ok(text: impl Into<String>, json: Value) -> Self {
        Self {
            text: text.into(),
            json,
            success: true,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenesisFile {
    #[serde(default)]
    allocation: Vec<Allocation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Allocation {
    account: String,
    amount: u64,
}

struct Context {
    config: CliConfig,
    keys: KeyStore,
}

impl Context {
    /// A key store name or a raw address.
    fn address(&self, who: &str) -> Result<Address> {
        if self.keys.contains(who) {
            return Ok(self.key(who)?.address());
        }
        who.parse()
            .map_err(|_| anyhow!("`{who}` is neither a known key name nor an address"))
    }

    fn key(&self, name: &str) -> Result<KeyPair> {
        self.keys
            .load(name)
            .with_context(|| format!("cannot load key `{name}`"))
    }

    fn open_writable(&self) -> Result<ContractLedger> {
        let path = &self.config.ledger_path;
        Ledger::open(path, Engine::new())
            .with_context(|| format!("cannot open ledger {}", path.display()))
    }

    fn open_read_only(&self) -> Result<ContractLedger> {
        let path = &self.config.ledger_path;
        Ledger::open_read_only(path, Engine::new())
            .with_context(|| format!("cannot open ledger {}", path.display()))
    }

    fn hash_method(&self, flag: Option<&str>) -> Result<HashAlgorithm> {
        match flag {
            Some(alg) => Ok(alg.parse()?),
            None => Ok(self.config.default_hash_method),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn run(cli: Cli) -> Result<Output> {
    let home = cli.home.unwrap_or_else(default_home);
    let config = CliConfig::load(&home, cli.ledger, cli.keystore)?;
    let ctx = Context {
        keys: KeyStore::new(config.keystore_dir.clone()),
        config,
    };

    match cli.command {
        Command::Keygen { name, seed } => keygen(&ctx, &name, seed.as_deref()),
        Command::Init { genesis, clock } => init(&ctx, genesis.as_deref(), clock.as_deref()),
        Command::Contract(cmd) => contract(&ctx, cmd),
        Command::Pay {
            actor,
            id,
            to,
            amount,
            invoice,
            hash,
        } => pay(
            &ctx,
            &actor,
            ContractId(id),
            &to,
            amount,
            &invoice,
            hash.as_deref(),
        ),
        Command::Balance { account } => {
            let address = ctx.address(&account)?;
            let balance = ctx.open_read_only()?.get_balance(&address);
            Ok(Output::ok(
                format!("{balance}\n"),
                json!({ "address": address, "balance": balance }),
            ))
        }
        Command::Events { id, kind } => events(&ctx, id, kind.as_deref()),
        Command::Audit { id } => {
            let ledger = ctx.open_read_only()?;
            let report = audit_contract(&ledger, ContractId(id))?;
            Ok(Output::ok(report.to_string(), report.to_json()))
        }
        Command::Verify { doc, id } => {
            let bytes = read_file(&doc)?;
            let ledger = ctx.open_read_only()?;
            let matched = verify_document_link(&ledger, ContractId(id), &bytes)?;
            Ok(Output {
                text: format!("{}\n", if matched { "MATCH" } else { "MISMATCH" }),
                json: json!({ "contract_id": id, "match": matched }),
                success: matched,
            })
        }
        Command::Evidence { id, out } => {
            let ledger = ctx.open_read_only()?;
            let bundle = export_evidence(&ledger, ContractId(id), &out)
                .with_context(|| format!("cannot export evidence to {}", out.display()))?;
            let fingerprint = bundle.export_fingerprint();
            Ok(Output::ok(
                format!("{fingerprint}\n"),
                json!({
                    "contract_id": id,
                    "path": out,
                    "export_fingerprint": fingerprint,
                    "events": bundle.events.len(),
                    "headers": bundle.headers.len(),
                }),
            ))
        }
        Command::EvidenceCheck { bundle } => {
            let bytes = read_file(&bundle)?;
            let checked = verify_evidence_bytes(&bytes)
                .with_context(|| format!("{} failed verification", bundle.display()))?;
            let fingerprint = checked.export_fingerprint();
            Ok(Output::ok(
                format!(
                    "OK: contract {}, {} events, export fingerprint {fingerprint}\n",
                    checked.contract_id(),
                    checked.events.len()
                ),
                json!({
                    "ok": true,
                    "contract_id": checked.contract_id(),
                    "events": checked.events.len(),
                    "export_fingerprint": fingerprint,
                }),
            ))
        }
        Command::ChainVerify => {
            let path = &ctx.config.ledger_path;
            let report = verify_ledger_file::<Engine>(path)
                .with_context(|| format!("cannot read ledger {}", path.display()))?;
            let text = match (&report.failure, &report.tip) {
                (None, Some(tip)) => format!(
                    "OK: {} blocks verified, tip height {} hash {}\n",
                    report.blocks_verified, tip.height, tip.block_hash
                ),
                (Some(failure), _) => format!("FAILED at {failure}\n"),
                (None, None) => unreachable!("a verified chain has a tip"),
            };
            Ok(Output {
                text,
                success: report.is_ok(),
                json: serde_json::to_value(&report)?,
            })
        }
    }
}

fn keygen(ctx: &Context, name: &str, seed: Option<&str>) -> Result<Output> {
    let seed = seed
        .map(|hex_seed| hex::decode(hex_seed).context("seed must be hex"))
        .transpose()?;
    let key_pair = KeyPair::generate(seed.as_deref())?;
    std::fs::create_dir_all(ctx.keys.dir())
        .with_context(|| format!("cannot create {}", ctx.keys.dir().display()))?;
    let path = ctx.keys.create(name, &key_pair)?;
    let address = key_pair.address();
    Ok(Output::ok(
        format!("{address}\n"),
        json!({
            "name": name,
            "address": address,
            "public_key": hex::encode(key_pair.public_key().to_bytes()),
            "key_file": path,
        }),
    ))
}

fn init(ctx: &Context, genesis: Option<&Path>, clock: Option<&str>) -> Result<Output> {
    let genesis_file: GenesisFile = match genesis {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("invalid genesis file {}", path.display()))?
        }
        None => GenesisFile::default(),
    };
    let clock: ClockMode = match clock {
        Some(mode) => mode.parse().map_err(anyhow::Error::msg)?,
        None => ctx.config.clock_mode,
    };
    let allocations = genesis_file
        .allocation
        .iter()
        .map(|a| Ok((ctx.address(&a.account)?, a.amount)))
        .collect::<Result<Vec<_>>>()?;

    let path = &ctx.config.ledger_path;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let ledger = Ledger::create(path, &allocations, clock, Engine::new())
        .with_context(|| format!("cannot create ledger {}", path.display()))?;
    let genesis = ledger.tip();
    Ok(Output::ok(
        format!(
            "initialized {} ({clock} clock, {} accounts, supply {}, genesis {})\n",
            path.display(),
            allocations.len(),
            ledger.total_supply(),
            genesis.block_hash
        ),
        json!({
            "ledger": path,
            "clock": clock,
            "accounts": allocations.len(),
            "supply": ledger.total_supply(),
            "genesis_hash": genesis.block_hash,
        }),
    ))
}

fn contract(ctx: &Context, cmd: ContractCommand) -> Result<Output> {
    match cmd {
        ContractCommand::Create {
            actor,
            counterparty,
            doc,
            hash,
        } => {
            let hash_method = ctx.hash_method(hash.as_deref())?;
            let document = read_file(&doc)?;
            let key = ctx.key(&actor)?;
            let counterparty = ctx.address(&counterparty)?;
            let fingerprint = fingerprint_document(&document, hash_method);
            let mut ledger = ctx.open_writable()?;
            let id = ledger.create_contract(&key, counterparty, fingerprint, hash_method)?;
            Ok(Output::ok(
                format!("{id}\n"),
                json!({
                    "contract_id": id,
                    "document_fingerprint": fingerprint,
                    "height": ledger.height(),
                }),
            ))
        }
        ContractCommand::Sign(args) => {
            let key = ctx.key(&args.actor)?;
            let mut ledger = ctx.open_writable()?;
            let state = ledger.create_contract_signature(&key, ContractId(args.id))?;
            Ok(Output::ok(
                format!("{state}\n"),
                json!({ "contract_id": args.id, "state": state, "height": ledger.height() }),
            ))
        }
        ContractCommand::Unsign(args) => {
            let key = ctx.key(&args.actor)?;
            let mut ledger = ctx.open_writable()?;
            let state = ledger.update_contract_unsign(&key, ContractId(args.id))?;
            Ok(Output::ok(
                format!("{state}\n"),
                json!({ "contract_id": args.id, "state": state, "height": ledger.height() }),
            ))
        }
        ContractCommand::Show { id } => {
            let ledger = ctx.open_read_only()?;
            let record = ledger.read_contract(ContractId(id))?;
            let list = |set: &std::collections::BTreeSet<Address>| {
                set.iter()
                    .map(Address::to_string)
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let text = format!(
                "contract {}\n  state:        {}\n  creator:      {}\n  counterparty: {}\n  document:     {}\n  signed by:    {}\n  unsigned by:  {}\n",
                record.contract_id,
                record.state,
                record.participants[0],
                record.participants[1],
                record.document_fingerprint,
                list(&record.signed_by),
                list(&record.unsigned_by),
            );
            Ok(Output::ok(text, serde_json::to_value(record)?))
        }
        ContractCommand::List { actor } => {
            let ledger = ctx.open_read_only()?;
            let ids: Vec<ContractId> = match actor {
                Some(who) => ledger.read_contract_ids(&ctx.address(&who)?),
                None => ledger
                    .machine()
                    .contracts()
                    .iter()
                    .map(|c| c.contract_id)
                    .collect(),
            };
            let text: String = ids.iter().map(|id| format!("{id}\n")).collect();
            Ok(Output::ok(text, json!({ "contract_ids": ids })))
        }
        ContractCommand::IsActor { actor, id } => {
            let address = ctx.address(&actor)?;
            let ledger = ctx.open_read_only()?;
            let is_actor = ledger.read_is_actor(&address, ContractId(id))?;
            Ok(Output::ok(
                format!("{is_actor}\n"),
                json!({ "address": address, "contract_id": id, "is_actor": is_actor }),
            ))
        }
    }
}

fn pay(
    ctx: &Context,
    actor: &str,
    contract_id: ContractId,
    to: &str,
    amount: u64,
    invoice_path: &Path,
    hash: Option<&str>,
) -> Result<Output> {
    let hash_method = ctx.hash_method(hash)?;
    let document = read_file(invoice_path)?;
    let key = ctx.key(actor)?;
    let payee = ctx.address(to)?;
    let invoice = Invoice {
        contract_id,
        payer: key.address(),
        payee,
        amount,
        invoice_fingerprint: fingerprint_document(&document, hash_method),
    };
    let mut ledger = ctx.open_writable()?;
    let receipt = ledger.create_contract_transfer(&key, invoice.clone())?;
    let payer_balance = ledger.get_balance(&invoice.payer);
    let payee_balance = ledger.get_balance(&payee);
    Ok(Output::ok(
        format!(
            "tx {}\n{actor} ({}): {payer_balance}\n{to} ({payee}): {payee_balance}\n",
            receipt.tx_ref, invoice.payer
        ),
        json!({
            "tx_ref": receipt.tx_ref,
            "invoice_fingerprint": invoice.invoice_fingerprint,
            "balances": [
                { "address": invoice.payer, "balance": payer_balance },
                { "address": payee, "balance": payee_balance },
            ],
        }),
    ))
}

fn events(ctx: &Context, id: Option<u64>, kind: Option<&str>) -> Result<Output> {
    let mut filter = EventFilter::all();
    filter.contract_id = id.map(ContractId);
    if let Some(kind) = kind {
        filter = filter.with_kind(kind.parse::<EventKind>().map_err(anyhow::Error::msg)?);
    }
    let ledger = ctx.open_read_only()?;
    let events = ledger.get_events(filter);
    let mut text = String::new();
    for event in &events {
        writeln!(text, "{}", describe(event))?;
    }
    Ok(Output::ok(text, json!({ "events": events })))
}

fn describe(event: &LedgerEvent) -> String {
    let head = format!(
        "{:<8} contract {:<4} {:<20} {}",
        event.tx_ref.to_string(),
        event.contract_id,
        event.kind().name(),
        event.actor
    );
    match &event.data {
        EventData::ContractTransfer {
            receiver,
            amount,
            invoice_fingerprint,
            ..
        } => format!("{head} -> {receiver} {amount} invoice {invoice_fingerprint}"),
        EventData::ContractCreated {
            document_fingerprint,
            ..
        } => format!("{head} document {document_fingerprint}"),
        _ => head,
    }
}
