//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mhc_core::audit::{export_evidence, replay_ledger, verify_document_link};
use mhc_core::codec::Canonical;
use mhc_core::fingerprint::fingerprint_document;
use mhc_core::ledger::{verify_ledger_file, EventData, Payload, Transaction, HEADER_LEN};
use mhc_core::{
    Address, ClockMode, ContractId, ContractLedger, ContractRecord, ContractState, Engine,
    HashAlgorithm, Invoice, KeyPair, Ledger, LedgerEvent,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("end-to-end CLI workflow", end_to_end_workflow),
        ("state-machine fuzzing and atomicity", state_machine_fuzzing),
        ("conservation over 10,000 transfers", conservation),
        ("tamper detection on a 200-block file", tamper_detection),
        ("event-sourcing replay", event_replay),
        ("query oracle equivalence", query_oracle),
        ("document-link soundness", document_link_soundness),
        ("seeded determinism", determinism),
    ];

    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|payload| {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name} ({elapsed:.2}s): {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name} ({elapsed:.2}s): {detail}", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Criterion 1

const ALICE_SEED: [u8; 32] = [0x11; 32];
const BOB_SEED: [u8; 32] = [0x22; 32];

fn mhc(home: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mhc"))
        .args(args)
        .env("MHC_HOME", home)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`mhc {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).trim_end().to_string())
}

/// The full workflow through the binary; returns the contract's event list.
fn scripted_run(dir: &Path) -> Result<serde_json::Value, String> {
    let home = dir.join("home");
    let alice = KeyPair::from_seed(ALICE_SEED).address();
    let bob = KeyPair::from_seed(BOB_SEED).address();
    let path = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let write = |name: &str, body: &str| std::fs::write(dir.join(name), body).unwrap();

    write(
        "genesis.toml",
        &format!(
            "[[allocation]]\naccount = \"{alice}\"\namount = 100\n\n[[allocation]]\naccount = \"{bob}\"\namount = 50\n"
        ),
    );
    write(
        "lease.txt",
        "Lease of a workshop. Monthly rent 40, service fee 10.\n",
    );
    write("invoice-1.txt", "Invoice 1: rent, 40\n");
    write("invoice-2.txt", "Invoice 2: service fee, 10\n");

    mhc(
        &home,
        &["init", &path("genesis.toml"), "--clock", "logical"],
    )?;
    let printed = mhc(
        &home,
        &["keygen", "alice", "--seed", &hex::encode(ALICE_SEED)],
    )?;
    ensure!(
        printed == alice.to_string(),
        "alice's address {printed} != {alice}"
    );
    let printed = mhc(&home, &["keygen", "bob", "--seed", &hex::encode(BOB_SEED)])?;
    ensure!(
        printed == bob.to_string(),
        "bob's address {printed} != {bob}"
    );

    let id = mhc(
        &home,
        &[
            "contract",
            "create",
            "--as",
            "alice",
            "--with",
            "bob",
            "--doc",
            &path("lease.txt"),
        ],
    )?;
    ensure!(id == "0", "first contract id is {id}");
    let state = mhc(&home, &["contract", "sign", "--as", "bob", "--id", "0"])?;
    ensure!(state == "Active", "after counter-signing: {state}");
    mhc(
        &home,
        &[
            "pay",
            "--as",
            "alice",
            "--id",
            "0",
            "--to",
            "bob",
            "--amount",
            "40",
            "--invoice",
            &path("invoice-1.txt"),
        ],
    )?;
    mhc(
        &home,
        &[
            "pay",
            "--as",
            "alice",
            "--id",
            "0",
            "--to",
            "bob",
            "--amount",
            "10",
            "--invoice",
            &path("invoice-2.txt"),
        ],
    )?;
    let state = mhc(&home, &["contract", "unsign", "--as", "alice", "--id", "0"])?;
    ensure!(
        state == "PendingDeactivation",
        "after first unsign: {state}"
    );
    let state = mhc(&home, &["contract", "unsign", "--as", "bob", "--id", "0"])?;
    ensure!(state == "Deactivated", "after second unsign: {state}");

    let verified = mhc(&home, &["chain-verify"])?;
    ensure!(verified.starts_with("OK"), "chain-verify: {verified}");
    let record: serde_json::Value =
        serde_json::from_str(&mhc(&home, &["--json", "contract", "show", "--id", "0"])?).unwrap();
    ensure!(
        record["state"] == "Deactivated",
        "final state {}",
        record["state"]
    );
    ensure!(
        mhc(&home, &["balance", "bob"])? == "100",
        "bob's final balance"
    );
    mhc(
        &home,
        &["evidence", "--id", "0", "--out", &path("evidence.mhce")],
    )?;

    let events: serde_json::Value =
        serde_json::from_str(&mhc(&home, &["--json", "events", "--id", "0"])?).unwrap();
    Ok(events["events"].clone())
}

fn end_to_end_workflow() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let events = scripted_run(dir.path())?;
    let elapsed = started.elapsed();

    let alice = KeyPair::from_seed(ALICE_SEED).address().to_string();
    let bob = KeyPair::from_seed(BOB_SEED).address().to_string();
    let expected = [
        ("ContractCreated", &alice),
        ("ContractSigned", &alice),
        ("ContractSigned", &bob),
        ("ContractActivated", &bob),
        ("ContractTransfer", &alice),
        ("ContractTransfer", &alice),
        ("ContractUnsigned", &alice),
        ("ContractUnsigned", &bob),
        ("ContractDeactivated", &bob),
    ];
    let actual: Vec<(String, String)> = events
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["kind"].as_str().unwrap().to_string(),
                e["actor"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let wanted: Vec<(String, String)> = expected
        .iter()
        .map(|(k, a)| (k.to_string(), a.to_string()))
        .collect();
    ensure!(actual == wanted, "event sequence {actual:?}");
    ensure!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    Ok(format!(
        "Deactivated, chain OK, 9 events in order, {:.0} ms",
        elapsed.as_secs_f64() * 1000.0
    ))
}

// ---------------------------------------------------------------------------
// Random operation sequences (criteria 2, 5, 6)

const ACTORS: usize = 3;
const MAX_CONTRACTS: u64 = 5;

#[derive(Debug, Clone)]
enum Op {
    Create {
        actor: usize,
        counterparty: usize,
        keccak: bool,
    },
    Sign {
        actor: usize,
        id: u64,
    },
    Pay {
        actor: usize,
        id: u64,
        payer: usize,
        payee: usize,
        amount: u64,
    },
    Unsign {
        actor: usize,
        id: u64,
    },
    /// Resubmit the last accepted transaction unchanged.
    Replay,
    /// A transaction claiming `claimed`'s address but signed by `signer`.
    Forge {
        signer: usize,
        claimed: usize,
        id: u64,
    },
}

impl Op {
    fn target(&self) -> Option<u64> {
        match *self {
            Op::Sign { id, .. } | Op::Pay { id, .. } | Op::Unsign { id, .. } => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Snapshot {
    file: Vec<u8>,
    events: Vec<LedgerEvent>,
    balances: BTreeMap<Address, u64>,
    contracts: Vec<ContractRecord>,
    nonces: BTreeMap<Address, u64>,
}

fn snapshot(ledger: &ContractLedger) -> Snapshot {
    Snapshot {
        file: ledger.to_file_bytes(),
        events: ledger.events().to_vec(),
        balances: ledger.accounts().as_map().clone(),
        contracts: ledger.machine().contracts().to_vec(),
        nonces: ledger.nonces().clone(),
    }
}

struct Fuzzer {
    rng: ChaCha8Rng,
    keys: Vec<KeyPair>,
    ledger: ContractLedger,
    last_accepted: Option<Transaction>,
    docs: u64,
}

impl Fuzzer {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys: Vec<KeyPair> = (0..ACTORS).map(|_| KeyPair::from_seed(rng.gen())).collect();
        let allocations: Vec<(Address, u64)> = keys
            .iter()
            .map(|k| (k.address(), rng.gen_range(0..200)))
            .collect();
        let ledger = Ledger::init(&allocations, ClockMode::Logical, Engine::new()).unwrap();
        Self {
            rng,
            keys,
            ledger,
            last_accepted: None,
            docs: 0,
        }
    }

    fn random_op(&mut self) -> Op {
        let r = &mut self.rng;
        let contracts = self.ledger.machine().contracts();
        let created = contracts.len() as u64;
        let mut actor = r.gen_range(0..ACTORS);
        let mut id = r.gen_range(0..MAX_CONTRACTS);
        let mut other = r.gen_range(0..ACTORS);
        // Mostly aim at an existing contract, acting as one of its parties.
        if created > 0 && r.gen_bool(0.75) {
            let record = &contracts[r.gen_range(0..contracts.len())];
            let index = |a: &Address| self.keys.iter().position(|k| k.address() == *a).unwrap();
            let (first, second) = (
                index(&record.participants[0]),
                index(&record.participants[1]),
            );
            id = record.contract_id.0;
            (actor, other) = if r.gen_bool(0.5) {
                (first, second)
            } else {
                (second, first)
            };
        }
        match r.gen_range(0..100) {
            0..=14 if created < MAX_CONTRACTS => Op::Create {
                actor,
                counterparty: if r.gen_bool(0.9) {
                    (actor + r.gen_range(1..ACTORS)) % ACTORS
                } else {
                    actor
                },
                keccak: r.gen_bool(0.3),
            },
            0..=29 => Op::Sign { actor, id },
            30..=81 => Op::Pay {
                actor,
                id,
                payer: if r.gen_bool(0.9) {
                    actor
                } else {
                    r.gen_range(0..ACTORS)
                },
                payee: if r.gen_bool(0.9) {
                    other
                } else {
                    r.gen_range(0..ACTORS)
                },
                amount: if r.gen_bool(0.05) {
                    0
                } else {
                    r.gen_range(1..80)
                },
            },
            82..=91 => Op::Unsign { actor, id },
            92..=95 => Op::Replay,
            _ => Op::Forge {
                signer: actor,
                claimed: r.gen_range(0..ACTORS),
                id,
            },
        }
    }

    fn apply(&mut self, op: &Op) -> bool {
        let keys = &self.keys;
        let tx = match *op {
            Op::Create {
                actor,
                counterparty,
                keccak,
            } => {
                self.docs += 1;
                let method = if keccak {
                    HashAlgorithm::Keccak256
                } else {
                    HashAlgorithm::Sha256
                };
                let doc = format!("contract document {}", self.docs);
                self.signed(
                    actor,
                    Payload::CreateContract {
                        counterparty: keys[counterparty].address(),
                        document_fingerprint: fingerprint_document(doc.as_bytes(), method),
                        hash_method: method,
                    },
                )
            }
            Op::Sign { actor, id } => self.signed(
                actor,
                Payload::SignContract {
                    contract_id: ContractId(id),
                },
            ),
            Op::Unsign { actor, id } => self.signed(
                actor,
                Payload::Unsign {
                    contract_id: ContractId(id),
                },
            ),
            Op::Pay {
                actor,
                id,
                payer,
                payee,
                amount,
            } => {
                self.docs += 1;
                let invoice = Invoice {
                    contract_id: ContractId(id),
                    payer: keys[payer].address(),
                    payee: keys[payee].address(),
                    amount,
                    invoice_fingerprint: fingerprint_document(
                        format!("invoice {}", self.docs).as_bytes(),
                        HashAlgorithm::Sha256,
                    ),
                };
                self.signed(actor, Payload::Transfer { invoice })
            }
            Op::Replay => match &self.last_accepted {
                Some(tx) => tx.clone(),
                None => return false,
            },
            Op::Forge {
                signer,
                claimed,
                id,
            } => {
                let claimed = keys[claimed].address();
                let mut tx = Transaction::signed(
                    &keys[signer],
                    self.ledger.next_nonce(&claimed),
                    Payload::SignContract {
                        contract_id: ContractId(id),
                    },
                );
                tx.sender = claimed;
                tx
            }
        };
        match self.ledger.submit(tx.clone()) {
            Ok(_) => {
                self.last_accepted = Some(tx);
                true
            }
            Err(_) => false,
        }
    }

    fn signed(&self, actor: usize, payload: Payload) -> Transaction {
        let key = &self.keys[actor];
        Transaction::signed(key, self.ledger.next_nonce(&key.address()), payload)
    }
}

/// Runs one random sequence, checking lifecycle legality and atomicity at
/// every step.
fn fuzz_sequence(seed: u64, steps: usize) -> Result<(Fuzzer, Tally), String> {
    let mut fuzz = Fuzzer::new(seed);
    let mut tally = Tally::default();
    for step in 0..steps {
        let op = fuzz.random_op();
        let before = snapshot(&fuzz.ledger);
        let accepted = fuzz.apply(&op);
        let after = snapshot(&fuzz.ledger);
        let at = format!("seed {seed} step {step} {op:?}");

        tally.record(&op, accepted);
        if !accepted {
            ensure!(after == before, "{at}: rejected operation changed state");
            continue;
        }
        ensure!(
            after.events.len() > before.events.len(),
            "{at}: accepted operation emitted no event"
        );
        for (old, new) in before.contracts.iter().zip(&after.contracts) {
            ensure!(
                old.state == new.state || old.state.successor() == Some(new.state),
                "{at}: illegal transition {} -> {}",
                old.state,
                new.state
            );
        }
        for new in &after.contracts[before.contracts.len()..] {
            ensure!(
                new.state == ContractState::Pending,
                "{at}: new contract is {}",
                new.state
            );
        }
        if let Some(id) = op.target() {
            let prior = before.contracts.get(id as usize).map(|c| c.state);
            ensure!(
                prior != Some(ContractState::Deactivated),
                "{at}: deactivated contract accepted a mutation"
            );
            if matches!(op, Op::Pay { .. }) {
                ensure!(
                    prior.is_some_and(ContractState::accepts_transfers),
                    "{at}: transfer accepted in state {prior:?}"
                );
            }
        }
        for record in &after.contracts {
            ensure!(
                record.implied_state() == Some(record.state),
                "{at}: contract {} violates its state invariant",
                record.contract_id
            );
            ensure!(
                record.signed_by.contains(&record.creator),
                "{at}: creator missing from signed_by"
            );
        }
    }
    Ok((fuzz, tally))
}

#[derive(Debug, Default)]
struct Tally {
    rejected: usize,
    /// Accepted creates, signs, payments and unsigns.
    accepted: [usize; 4],
}

impl Tally {
    fn record(&mut self, op: &Op, accepted: bool) {
        let slot = match op {
            Op::Create { .. } => 0,
            Op::Sign { .. } => 1,
            Op::Pay { .. } => 2,
            Op::Unsign { .. } => 3,
            Op::Replay | Op::Forge { .. } => {
                self.rejected += usize::from(!accepted);
                return;
            }
        };
        if accepted {
            self.accepted[slot] += 1;
        } else {
            self.rejected += 1;
        }
    }
}

fn state_machine_fuzzing() -> Outcome {
    let mut operations = 0;
    let mut total = Tally::default();
    let mut transitions = BTreeSet::new();
    for seed in 0..1_000 {
        let (fuzz, tally) = fuzz_sequence(seed, 40)?;
        operations += 40;
        total.rejected += tally.rejected;
        for (sum, n) in total.accepted.iter_mut().zip(tally.accepted) {
            *sum += n;
        }
        for record in fuzz.ledger.machine().contracts() {
            transitions.insert(record.state);
        }
    }
    ensure!(
        transitions.len() == 4,
        "fuzzing never reached every state: {transitions:?}"
    );
    let [creates, signs, pays, unsigns] = total.accepted;
    Ok(format!(
        "1000 sequences, {operations} operations; accepted {creates} creates, {signs} signs, \
         {pays} payments, {unsigns} unsigns; {} rejected with state unchanged",
        total.rejected
    ))
}

fn event_replay() -> Outcome {
    for seed in 10_000..10_100 {
        let (fuzz, _) = fuzz_sequence(seed, 60)?;
        let replayed = replay_ledger(&fuzz.ledger).map_err(|e| format!("seed {seed}: {e}"))?;
        if let Some(diff) = replayed.diff(fuzz.ledger.machine(), fuzz.ledger.accounts()) {
            return Err(format!("seed {seed}: {diff}"));
        }
        let live: Vec<&ContractRecord> = fuzz.ledger.machine().contracts().iter().collect();
        let rebuilt: Vec<&ContractRecord> = replayed.contracts.values().collect();
        ensure!(live == rebuilt, "seed {seed}: contract records differ");
    }
    Ok("100 ledgers rebuilt from events match engine state".into())
}

/// Participants per contract, read straight from the event log.
fn participants_from_events(events: &[LedgerEvent]) -> BTreeMap<ContractId, [Address; 2]> {
    events
        .iter()
        .filter_map(|e| match &e.data {
            EventData::ContractCreated { participants, .. } => Some((e.contract_id, *participants)),
            _ => None,
        })
        .collect()
}

fn query_oracle() -> Outcome {
    let mut pairs = 0;
    let stranger = KeyPair::from_seed([0xee; 32]).address();
    for seed in 0..1_000 {
        let (fuzz, _) = fuzz_sequence(seed, 40)?;
        let ledger = &fuzz.ledger;
        let oracle = participants_from_events(ledger.events());
        let actors = fuzz.keys.iter().map(KeyPair::address).chain([stranger]);
        for actor in actors {
            let expected: Vec<ContractId> = oracle
                .iter()
                .filter(|(_, p)| p.contains(&actor))
                .map(|(id, _)| *id)
                .collect();
            ensure!(
                ledger.read_contract_ids(&actor) == expected,
                "seed {seed}: read_contract_ids({actor}) disagrees"
            );
            for id in 0..MAX_CONTRACTS + 2 {
                let id = ContractId(id);
                let answer = ledger.read_is_actor(&actor, id).ok();
                let truth = oracle.get(&id).map(|p| p.contains(&actor));
                ensure!(
                    answer == truth,
                    "seed {seed}: read_is_actor({actor}, {id}) disagrees"
                );
                pairs += 1;
            }
        }
    }
    Ok(format!(
        "{pairs} (actor, contract) pairs across 1000 ledgers"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 3

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let keys: Vec<KeyPair> = (0..ACTORS).map(|_| KeyPair::from_seed(rng.gen())).collect();
    let allocations: Vec<(Address, u64)> = keys
        .iter()
        .map(|k| (k.address(), rng.gen_range(1_000..1_000_000)))
        .collect();
    let genesis_total: u128 = allocations.iter().map(|(_, a)| u128::from(*a)).sum();
    let mut ledger = Ledger::init(&allocations, ClockMode::Logical, Engine::new()).unwrap();

    // One active contract for every pair of actors.
    let mut contract = BTreeMap::new();
    for i in 0..ACTORS {
        for j in i + 1..ACTORS {
            let doc =
                fingerprint_document(format!("pair {i}-{j}").as_bytes(), HashAlgorithm::Sha256);
            let id = ledger
                .create_contract(&keys[i], keys[j].address(), doc, HashAlgorithm::Sha256)
                .unwrap();
            ledger.create_contract_signature(&keys[j], id).unwrap();
            contract.insert((i, j), id);
            contract.insert((j, i), id);
        }
    }

    let mut done = 0;
    while done < 10_000 {
        let payer = rng.gen_range(0..ACTORS);
        let payee = (payer + rng.gen_range(1..ACTORS)) % ACTORS;
        let balance = ledger.get_balance(&keys[payer].address());
        if balance == 0 {
            continue;
        }
        let invoice = Invoice {
            contract_id: contract[&(payer, payee)],
            payer: keys[payer].address(),
            payee: keys[payee].address(),
            amount: rng.gen_range(1..=balance.min(50_000)),
            invoice_fingerprint: fingerprint_document(
                format!("invoice {done}").as_bytes(),
                HashAlgorithm::Sha256,
            ),
        };
        ledger
            .create_contract_transfer(&keys[payer], invoice)
            .map_err(|e| format!("valid transfer {done} rejected: {e}"))?;
        done += 1;
        let total = ledger.accounts().total();
        ensure!(
            total == genesis_total,
            "after transfer {done}: {total} != {genesis_total}"
        );
    }
    Ok(format!("10000 transfers, supply {genesis_total} unchanged"))
}

// ---------------------------------------------------------------------------
// Criterion 4

fn tamper_detection() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.mhc");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (a, b) = (KeyPair::from_seed(rng.gen()), KeyPair::from_seed(rng.gen()));
    {
        let mut ledger = Ledger::create(
            &path,
            &[(a.address(), 1_000_000), (b.address(), 1_000_000)],
            ClockMode::Logical,
            Engine::new(),
        )
        .unwrap();
        let doc = fingerprint_document(b"tamper target", HashAlgorithm::Sha256);
        let id = ledger
            .create_contract(&a, b.address(), doc, HashAlgorithm::Sha256)
            .unwrap();
        ledger.create_contract_signature(&b, id).unwrap();
        while ledger.height() < 199 {
            let (payer, payee) = if rng.gen_bool(0.5) {
                (&a, &b)
            } else {
                (&b, &a)
            };
            let invoice = Invoice {
                contract_id: id,
                payer: payer.address(),
                payee: payee.address(),
                amount: rng.gen_range(1..1_000),
                invoice_fingerprint: fingerprint_document(
                    &rng.gen::<[u8; 16]>(),
                    HashAlgorithm::Sha256,
                ),
            };
            ledger.create_contract_transfer(payer, invoice).unwrap();
        }
    }
    let original = std::fs::read(&path).unwrap();
    let clean = verify_ledger_file::<Engine>(&path).unwrap();
    ensure!(clean.is_ok(), "untampered file failed: {:?}", clean.failure);
    ensure!(
        clean.blocks_verified == 200,
        "{} blocks in file",
        clean.blocks_verified
    );

    // Block height owning each byte offset; header bytes count as height 0.
    let ledger = Ledger::open_read_only(&path, Engine::new()).unwrap();
    let mut owner = vec![0u64; HEADER_LEN];
    for block in ledger.blocks() {
        owner.extend(std::iter::repeat_n(
            block.height,
            4 + block.to_canonical_bytes().len(),
        ));
    }
    drop(ledger);
    ensure!(
        owner.len() == original.len(),
        "frame map does not cover the file"
    );

    let mut worst_margin = 0u64;
    for trial in 0..100 {
        let offset = rng.gen_range(0..original.len());
        let mut bytes = original.clone();
        bytes[offset] ^= rng.gen_range(1..=255u8);
        std::fs::write(&path, &bytes).unwrap();
        let report = verify_ledger_file::<Engine>(&path).unwrap();
        let block = owner[offset];
        match report.failure {
            None => {
                return Err(format!(
                    "trial {trial}: mutation at offset {offset} (block {block}) undetected"
                ))
            }
            Some(f) if f.height > block => {
                return Err(format!(
                    "trial {trial}: offset {offset} in block {block} reported at {}",
                    f.height
                ))
            }
            Some(f) => worst_margin = worst_margin.max(block - f.height),
        }
    }
    std::fs::write(&path, &original).unwrap();
    Ok(format!(
        "100/100 mutations detected at or before their block (max lead {worst_margin})"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 7

fn document_link_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (a, b) = (KeyPair::from_seed(rng.gen()), KeyPair::from_seed(rng.gen()));
    let mut ledger = Ledger::init(&[], ClockMode::Logical, Engine::new()).unwrap();
    let mut corpus = Vec::with_capacity(1_000);
    for n in 0..1_000 {
        let len = rng.gen_range(1..2_048);
        let doc: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let method = if n % 2 == 0 {
            HashAlgorithm::Sha256
        } else {
            HashAlgorithm::Keccak256
        };
        let id = ledger
            .create_contract(&a, b.address(), fingerprint_document(&doc, method), method)
            .unwrap();
        corpus.push((id, doc));
    }

    let mut mutants = 0;
    for (id, doc) in &corpus {
        ensure!(
            verify_document_link(&ledger, *id, doc).unwrap(),
            "original document of contract {id} rejected"
        );
        for _ in 0..10 {
            let mut mutant = doc.clone();
            let at = rng.gen_range(0..mutant.len());
            mutant[at] ^= rng.gen_range(1..=255u8);
            ensure!(
                !verify_document_link(&ledger, *id, &mutant).unwrap(),
                "mutant of contract {id} (byte {at}) accepted"
            );
            mutants += 1;
        }
    }
    Ok(format!(
        "1000 originals accepted, {mutants} single-byte mutants rejected"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 8

/// Seeded random scenario written to `dir`; returns (ledger file, tip, bundle).
fn seeded_scenario(dir: &Path) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let mut fuzz = Fuzzer::new(8);
    let path = dir.join("ledger.mhc");
    let mut ledger = Ledger::create(
        &path,
        &fuzz.ledger.genesis_allocations(),
        ClockMode::Logical,
        Engine::new(),
    )
    .unwrap();
    std::mem::swap(&mut ledger, &mut fuzz.ledger);
    for _ in 0..300 {
        let op = fuzz.random_op();
        fuzz.apply(&op);
    }
    let bundle = dir.join("evidence.mhce");
    export_evidence(&fuzz.ledger, ContractId(0), &bundle).unwrap();
    drop(fuzz);
    (
        std::fs::read(&path).unwrap(),
        std::fs::read(mhc_core::ledger::tip_path(&path)).unwrap(),
        std::fs::read(&bundle).unwrap(),
    )
}

fn determinism() -> Outcome {
    let (one, two) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = seeded_scenario(one.path());
    let second = seeded_scenario(two.path());
    ensure!(first.0 == second.0, "ledger files differ");
    ensure!(first.1 == second.1, "tip records differ");
    ensure!(first.2 == second.2, "evidence bundles differ");

    let (one, two) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    scripted_run(one.path())?;
    scripted_run(two.path())?;
    for name in ["home/ledger.mhc", "evidence.mhce"] {
        let a = std::fs::read(one.path().join(name)).unwrap();
        let b = std::fs::read(two.path().join(name)).unwrap();
        ensure!(a == b, "CLI runs produced different {name}");
    }
    Ok(format!(
        "library and CLI runs byte-identical ({} byte ledger, {} byte bundle)",
        first.0.len(),
        first.2.len()
    ))
}
