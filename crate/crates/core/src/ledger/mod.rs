//! Embedded append-only ledger.
//!
//! The ledger owns ordering, signatures, nonces and persistence. What a
//! payload *means* is decided by a [`StateMachine`] supplied at construction
//! (the contract engine in practice). Each accepted transaction is sealed
//! into its own block.
//!
//! `submit` takes `&mut self`, so there is exactly one writer; wrap the ledger
//! in a `RwLock` to share it between a writer and concurrent readers. Readers
//! always see a prefix of fully sealed blocks.

mod account;
mod block;
mod event;
mod store;
mod transaction;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use crate::identity::{Address, KeyPair};

pub use account::AccountState;
pub use block::{compute_block_hash, Block, BlockHash, BlockHeader};
pub use event::{EventData, EventFilter, EventKind, LedgerEvent};
pub use store::{
    decode_header, encode_frame, encode_header, jsonl_path, tip_path, FrameReader, StoreError,
    TipRecord, HEADER_LEN, LEDGER_MAGIC, LEDGER_VERSION,
};
pub use transaction::{signing_bytes, Payload, Transaction, TxRef, Witness};
pub use verify::{
    verify_chain, verify_ledger_bytes, verify_ledger_file, ChainFailure, FailureReason,
    VerificationReport,
};

use store::LedgerStore;

/// Payload semantics plugged into the ledger.
///
/// `check` must not have side effects; `apply` commits what `check` approved.
/// The split lets the ledger persist a block before any state changes.
pub trait StateMachine {
    type Error: std::error::Error + Send + Sync + 'static;
    type Transition;

    fn check(
        &self,
        accounts: &AccountState,
        sender: &Address,
        payload: &Payload,
        tx_ref: TxRef,
    ) -> Result<(Self::Transition, Vec<LedgerEvent>), Self::Error>;

    fn apply(&mut self, accounts: &mut AccountState, transition: Self::Transition);
}

/// What [`StateMachine::check`] approves: the transition and the events it emits.
type Checked<M> = (<M as StateMachine>::Transition, Vec<LedgerEvent>);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Seconds since the Unix epoch, never decreasing along the chain.
    #[default]
    Wall,
    /// Block height doubles as the timestamp; makes runs reproducible.
    Logical,
}

impl ClockMode {
    fn timestamp_for(self, height: u64, previous: Option<u64>) -> u64 {
        match self {
            ClockMode::Logical => height,
            ClockMode::Wall => {
                let now = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                now.max(previous.unwrap_or(0))
            }
        }
    }
}

impl fmt::Display for ClockMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClockMode::Wall => "wall",
            ClockMode::Logical => "logical",
        })
    }
}

impl FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wall" => Ok(ClockMode::Wall),
            "logical" => Ok(ClockMode::Logical),
            other => Err(format!(
                "unknown clock mode `{other}` (expected wall or logical)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("duplicate genesis allocation for {0}")]
    DuplicateAllocation(Address),
    #[error("genesis allocations exceed the representable supply")]
    SupplyOverflow,
    #[error("ledger failed verification at {0}")]
    Corrupt(ChainFailure),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error)]
pub enum SubmitError<E: std::error::Error + 'static> {
    #[error("bad signature: witness does not authorize sender {0}")]
    BadSignature(Address),
    #[error("bad nonce for {sender}: expected {expected}, got {got}")]
    BadNonce {
        sender: Address,
        expected: u64,
        got: u64,
    },
    #[error("genesis allocations are only valid in block 0")]
    GenesisOnly,
    #[error(transparent)]
    Rejected(E),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl<E: std::error::Error + 'static> SubmitError<E> {
    pub fn rejection(&self) -> Option<&E> {
        match self {
            SubmitError::Rejected(e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct Ledger<M> {
    clock: ClockMode,
    blocks: Vec<Block>,
    events: Vec<LedgerEvent>,
    accounts: AccountState,
    nonces: BTreeMap<Address, u64>,
    machine: M,
    store: Option<LedgerStore>,
}

impl<M: StateMachine> Ledger<M> {
    /// In-memory ledger with a sealed genesis block.
    pub fn init(
        allocations: &[(Address, u64)],
        clock: ClockMode,
        machine: M,
    ) -> Result<Self, LedgerError> {
        let genesis = genesis_block(allocations, clock)?;
        Ok(Self::from_genesis(genesis, clock, machine).expect("freshly built genesis is valid"))
    }

    /// Creates a new ledger file at `path` (which must not exist) and keeps it
    /// open for appending.
    pub fn create(
        path: &Path,
        allocations: &[(Address, u64)],
        clock: ClockMode,
        machine: M,
    ) -> Result<Self, LedgerError> {
        let mut ledger = Self::init(allocations, clock, machine)?;
        ledger.store = Some(LedgerStore::create(path, clock, &ledger.blocks[0], &[])?);
        Ok(ledger)
    }

    /// Opens an existing ledger file for writing, replaying and verifying every block.
    pub fn open(path: &Path, machine: M) -> Result<Self, LedgerError> {
        Self::open_with(path, machine, true)
    }

    pub fn open_read_only(path: &Path, machine: M) -> Result<Self, LedgerError> {
        Self::open_with(path, machine, false)
    }

    fn open_with(path: &Path, machine: M, writable: bool) -> Result<Self, LedgerError> {
        let (store, bytes, tip) = LedgerStore::open(path, writable)?;
        let mut ledger =
            verify::rebuild(&bytes, tip.as_deref(), machine).map_err(LedgerError::Corrupt)?;
        ledger.store = Some(store);
        Ok(ledger)
    }

    fn from_genesis(genesis: Block, clock: ClockMode, machine: M) -> Result<Self, FailureReason> {
        if genesis.height != 0 {
            return Err(FailureReason::HeightMismatch {
                expected: 0,
                found: genesis.height,
            });
        }
        if genesis.prev_hash != BlockHash::ZERO {
            return Err(FailureReason::BadGenesis("prev_hash is not zero".into()));
        }
        if genesis.compute_hash() != genesis.block_hash {
            return Err(FailureReason::HashMismatch);
        }
        if clock == ClockMode::Logical && genesis.timestamp != 0 {
            return Err(FailureReason::Timestamp(format!(
                "logical clock expects 0, found {}",
                genesis.timestamp
            )));
        }
        let mut accounts = AccountState::new();
        let mut supply: u64 = 0;
        for tx in &genesis.transactions {
            match (&tx.payload, &tx.witness) {
                (Payload::GenesisAllocation { account, amount }, Witness::Genesis)
                    if tx.nonce == 0 && tx.sender == Address::from_bytes([0; 20]) =>
                {
                    if accounts.as_map().contains_key(account) {
                        return Err(FailureReason::BadGenesis(format!(
                            "duplicate allocation for {account}"
                        )));
                    }
                    supply = supply
                        .checked_add(*amount)
                        .ok_or_else(|| FailureReason::BadGenesis("supply overflow".into()))?;
                    accounts.allocate(*account, *amount);
                }
                _ => {
                    return Err(FailureReason::BadGenesis(format!(
                        "unexpected {} transaction in genesis",
                        tx.payload.name()
                    )))
                }
            }
        }
        Ok(Self {
            clock,
            blocks: vec![genesis],
            events: Vec::new(),
            accounts,
            nonces: BTreeMap::new(),
            machine,
            store: None,
        })
    }

    /// Checks signature, nonce and payload of `tx` as the next block's only
    /// transaction, without changing anything.
    fn validate(
        &self,
        tx: &Transaction,
        tx_ref: TxRef,
    ) -> Result<Checked<M>, SubmitError<M::Error>> {
        if matches!(tx.payload, Payload::GenesisAllocation { .. }) {
            return Err(SubmitError::GenesisOnly);
        }
        if !tx.has_valid_signature() {
            return Err(SubmitError::BadSignature(tx.sender));
        }
        let expected = self.next_nonce(&tx.sender);
        if tx.nonce != expected {
            return Err(SubmitError::BadNonce {
                sender: tx.sender,
                expected,
                got: tx.nonce,
            });
        }
        self.machine
            .check(&self.accounts, &tx.sender, &tx.payload, tx_ref)
            .map_err(SubmitError::Rejected)
    }

    fn commit(&mut self, block: Block, transition: M::Transition, events: Vec<LedgerEvent>) {
        let tx = &block.transactions[0];
        self.nonces.insert(tx.sender, tx.nonce);
        self.machine.apply(&mut self.accounts, transition);
        self.events.extend(events);
        self.blocks.push(block);
    }

    /// Validates `tx`, seals it into a new block and applies it. A rejected
    /// transaction leaves the ledger (and its file) unchanged.
    pub fn submit(&mut self, tx: Transaction) -> Result<TxRef, SubmitError<M::Error>> {
        let tip = self.tip();
        let height = tip.height + 1;
        let tx_ref = TxRef::new(height, 0);
        let (transition, events) = self.validate(&tx, tx_ref)?;
        let timestamp = self.clock.timestamp_for(height, Some(tip.timestamp));
        let block = Block::seal(height, timestamp, tip.block_hash, vec![tx]);
        if let Some(store) = self.store.as_mut() {
            store.append(&block, &events)?;
        }
        self.commit(block, transition, events);
        Ok(tx_ref)
    }

    /// Signs `payload` with `key_pair` at its next nonce and submits it.
    pub fn submit_signed(
        &mut self,
        key_pair: &KeyPair,
        payload: Payload,
    ) -> Result<TxRef, SubmitError<M::Error>> {
        let nonce = self.next_nonce(&key_pair.address());
        self.submit(Transaction::signed(key_pair, nonce, payload))
    }

    /// Replays an already-sealed block, checking it exactly like a submission.
    fn replay_block(&mut self, block: Block) -> Result<(), FailureReason> {
        let tip = self.tip();
        let expected = tip.height + 1;
        if block.height != expected {
            return Err(FailureReason::HeightMismatch {
                expected,
                found: block.height,
            });
        }
        if block.prev_hash != tip.block_hash {
            return Err(FailureReason::BrokenLink);
        }
        if block.compute_hash() != block.block_hash {
            return Err(FailureReason::HashMismatch);
        }
        match self.clock {
            ClockMode::Logical if block.timestamp != block.height => {
                return Err(FailureReason::Timestamp(format!(
                    "logical clock expects {}, found {}",
                    block.height, block.timestamp
                )))
            }
            ClockMode::Wall if block.timestamp < tip.timestamp => {
                return Err(FailureReason::Timestamp("timestamp decreases".into()))
            }
            _ => {}
        }
        if block.transactions.len() != 1 {
            return Err(FailureReason::BlockShape(format!(
                "expected one transaction, found {}",
                block.transactions.len()
            )));
        }
        let (transition, events) = self
            .validate(&block.transactions[0], TxRef::new(block.height, 0))
            .map_err(|e| FailureReason::InvalidTransaction(e.to_string()))?;
        self.commit(block, transition, events);
        Ok(())
    }
}

impl<M> Ledger<M> {
    pub fn clock(&self) -> ClockMode {
        self.clock
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, height: u64) -> Option<&Block> {
        usize::try_from(height)
            .ok()
            .and_then(|h| self.blocks.get(h))
    }

    pub fn tip(&self) -> BlockHeader {
        self.blocks
            .last()
            .expect("ledger always holds a genesis block")
            .header()
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn transaction(&self, tx_ref: TxRef) -> Option<&Transaction> {
        self.block(tx_ref.height)?
            .transactions
            .get(tx_ref.index as usize)
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    /// Events in ledger order matching `filter`.
    pub fn get_events(&self, filter: EventFilter) -> Vec<LedgerEvent> {
        self.events
            .iter()
            .filter(|e| filter.matches(e))
            .cloned()
            .collect()
    }

    pub fn get_balance(&self, address: &Address) -> u64 {
        self.accounts.balance(address)
    }

    pub fn accounts(&self) -> &AccountState {
        &self.accounts
    }

    /// Next nonce `address` must use: one past the highest it has used.
    pub fn next_nonce(&self, address: &Address) -> u64 {
        self.nonces.get(address).map_or(1, |n| n + 1)
    }

    pub fn nonces(&self) -> &BTreeMap<Address, u64> {
        &self.nonces
    }

    pub fn machine(&self) -> &M {
        &self.machine
    }

    pub fn genesis_allocations(&self) -> Vec<(Address, u64)> {
        self.blocks[0]
            .transactions
            .iter()
            .filter_map(|tx| match tx.payload {
                Payload::GenesisAllocation { account, amount } => Some((account, amount)),
                _ => None,
            })
            .collect()
    }

    pub fn total_supply(&self) -> u128 {
        self.genesis_allocations()
            .iter()
            .map(|&(_, amount)| u128::from(amount))
            .sum()
    }

    pub fn path(&self) -> Option<&Path> {
        self.store.as_ref().map(|s| s.path())
    }

    /// The exact bytes of this ledger's file representation.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = encode_header(self.clock).to_vec();
        for block in &self.blocks {
            out.extend_from_slice(&encode_frame(block));
        }
        out
    }

    pub fn tip_record(&self) -> TipRecord {
        let tip = self.tip();
        TipRecord {
            clock: self.clock,
            height: tip.height,
            block_hash: tip.block_hash,
        }
    }

    /// The companion JSON-lines export, one object per block.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            let events: Vec<LedgerEvent> = self
                .events
                .iter()
                .filter(|e| e.tx_ref.height == block.height)
                .cloned()
                .collect();
            out.push_str(&store::json_line(block, &events));
        }
        out
    }
}

fn genesis_block(allocations: &[(Address, u64)], clock: ClockMode) -> Result<Block, LedgerError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut supply: u64 = 0;
    for (address, amount) in allocations {
        if !seen.insert(*address) {
            return Err(LedgerError::DuplicateAllocation(*address));
        }
        supply = supply
            .checked_add(*amount)
            .ok_or(LedgerError::SupplyOverflow)?;
    }
    let transactions = allocations
        .iter()
        .map(|&(address, amount)| Transaction::genesis(address, amount))
        .collect();
    Ok(Block::seal(
        0,
        clock.timestamp_for(0, None),
        BlockHash::ZERO,
        transactions,
    ))
}
