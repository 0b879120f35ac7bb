//! Two-party hybrid contracts on an embedded hash-chained ledger.
//!
//! An off-chain legal document is bound to an on-ledger contract record by
//! its fingerprint. Every lifecycle action (create, counter-sign, pay an
//! invoice, unsign) is a signed transaction sealed into its own block, and
//! every state change emits an event that can be replayed and audited.
//!
//! - [`identity`]: Ed25519 keypairs, addresses, key store files
//! - [`fingerprint`]: document digests (`sha-256`, `keccak-256`)
//! - [`ledger`]: blocks, transactions, events, persistence and verification
//! - [`engine`]: the contract state machine and its operations
//! - [`audit`]: reports, document-link checks, replay and evidence bundles

pub mod audit;
pub mod codec;
pub mod engine;
pub mod fingerprint;
pub mod identity;
pub mod ledger;

pub use engine::{
    ContractError, ContractId, ContractLedger, ContractRecord, ContractState, ContractSubmitError,
    Engine, Invoice, TransferReceipt,
};
pub use fingerprint::{Fingerprint, HashAlgorithm};
pub use identity::{Address, KeyPair, PublicKey, Signature};
pub use ledger::{ClockMode, EventFilter, EventKind, Ledger, LedgerEvent, TxRef};
