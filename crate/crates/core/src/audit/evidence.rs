//! Dispute evidence bundles.
//!
//! A bundle carries one contract's record and full event history, the blocks
//! holding the referenced transactions, the headers of every block spanning
//! them, and the fingerprints of every document involved. It can be checked
//! offline without the ledger.
//!
//! File layout: `"MHCE"`, version `0x01`, canonical bundle body, then a
//! 32-byte SHA-256 over everything before it (the export digest).

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use super::replay::replay_contract;
use super::AuditError;
use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::engine::{ContractId, ContractRecord, Engine};
use crate::fingerprint::{sha256, Fingerprint, HashAlgorithm};
use crate::ledger::{Block, BlockHeader, EventData, EventFilter, Ledger, LedgerEvent};

const MAGIC: &[u8; 4] = b"MHCE";
const VERSION: u8 = 0x01;
const PREFIX_LEN: usize = 5;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum EvidenceError {
    #[error("bundle is too short")]
    Truncated,
    #[error("not an evidence bundle (bad magic)")]
    BadMagic,
    #[error("unsupported bundle version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("export digest does not match bundle contents")]
    DigestMismatch,
    #[error("undecodable bundle: {0}")]
    Decode(#[from] CodecError),
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceBundle {
    pub contract: ContractRecord,
    pub events: Vec<LedgerEvent>,
    /// Contiguous headers from the first to the last referenced height.
    pub headers: Vec<BlockHeader>,
    /// Full blocks for every referenced height, ascending.
    pub blocks: Vec<Block>,
    /// The contract document first, then each invoice in ledger order.
    pub document_fingerprints: Vec<Fingerprint>,
}

impl Canonical for EvidenceBundle {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.contract);
        enc.put_seq(&self.events);
        enc.put_seq(&self.headers);
        enc.put_seq(&self.blocks);
        enc.put_seq(&self.document_fingerprints);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            contract: dec.get()?,
            events: dec.seq()?,
            headers: dec.seq()?,
            blocks: dec.seq()?,
            document_fingerprints: dec.seq()?,
        })
    }
}

impl EvidenceBundle {
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.to_canonical_bytes());
        let digest = sha256(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Digest over the bundle file's magic, version and body.
    pub fn export_fingerprint(&self) -> Fingerprint {
        let bytes = self.to_file_bytes();
        let mut digest = [0u8; DIGEST_LEN];
        digest.copy_from_slice(&bytes[bytes.len() - DIGEST_LEN..]);
        Fingerprint::new(HashAlgorithm::Sha256, digest)
    }

    pub fn contract_id(&self) -> ContractId {
        self.contract.contract_id
    }

    /// Offline consistency checks; see the module docs for what is covered.
    pub fn check(&self) -> Result<(), EvidenceError> {
        let bad = |msg: String| Err(EvidenceError::Inconsistent(msg));
        let id = self.contract.contract_id;

        if let Some(e) = self.events.iter().find(|e| e.contract_id != id) {
            return bad(format!(
                "event for contract {} in bundle for {id}",
                e.contract_id
            ));
        }
        let replayed = replay_contract(id, &self.events)
            .map_err(|e| EvidenceError::Inconsistent(e.to_string()))?;
        if replayed != self.contract {
            return bad("contract record does not match its events".into());
        }

        for pair in self.headers.windows(2) {
            if pair[1].height != pair[0].height + 1 {
                return bad(format!("header gap after height {}", pair[0].height));
            }
            if pair[1].prev_hash != pair[0].block_hash {
                return bad(format!("broken link at height {}", pair[1].height));
            }
        }
        let header_at = |height: u64| {
            let first = self.headers.first()?.height;
            self.headers
                .get(usize::try_from(height.checked_sub(first)?).ok()?)
        };
        for pair in self.blocks.windows(2) {
            if pair[1].height <= pair[0].height {
                return bad("blocks not strictly ascending".into());
            }
        }
        for block in &self.blocks {
            if block.compute_hash() != block.block_hash {
                return bad(format!("block {} hash mismatch", block.height));
            }
            if header_at(block.height) != Some(&block.header()) {
                return bad(format!("block {} not covered by headers", block.height));
            }
        }

        let referenced: BTreeSet<u64> = self.events.iter().map(|e| e.tx_ref.height).collect();
        if referenced.len() != self.blocks.len() {
            return bad("blocks do not match referenced heights".into());
        }
        for event in &self.events {
            let tx = self
                .blocks
                .iter()
                .find(|b| b.height == event.tx_ref.height)
                .and_then(|b| b.transactions.get(event.tx_ref.index as usize))
                .ok_or_else(|| {
                    EvidenceError::Inconsistent(format!("tx {} not in bundle", event.tx_ref))
                })?;
            if !tx.has_valid_signature() || tx.sender != event.actor {
                return bad(format!(
                    "tx {} is not signed by the event actor",
                    event.tx_ref
                ));
            }
        }

        if self.document_fingerprints != collect_fingerprints(&self.events) {
            return bad("document fingerprint list does not match events".into());
        }
        Ok(())
    }
}

fn collect_fingerprints(events: &[LedgerEvent]) -> Vec<Fingerprint> {
    events
        .iter()
        .filter_map(|e| match &e.data {
            EventData::ContractCreated {
                document_fingerprint,
                ..
            } => Some(*document_fingerprint),
            EventData::ContractTransfer {
                invoice_fingerprint,
                ..
            } => Some(*invoice_fingerprint),
            _ => None,
        })
        .collect()
}

/// Assembles the bundle for `contract_id` from the ledger's events and blocks.
pub fn build_evidence(
    ledger: &Ledger<Engine>,
    contract_id: ContractId,
) -> Result<EvidenceBundle, AuditError> {
    let events = ledger.get_events(EventFilter::contract(contract_id));
    if events.is_empty() {
        return Err(AuditError::UnknownContract(contract_id));
    }
    let contract = replay_contract(contract_id, &events)?;
    let heights: BTreeSet<u64> = events.iter().map(|e| e.tx_ref.height).collect();
    let first = *heights.first().expect("events are non-empty");
    let last = *heights.last().expect("events are non-empty");
    let headers = (first..=last)
        .map(|h| ledger.block(h).expect("event heights exist").header())
        .collect();
    let blocks = heights
        .iter()
        .map(|&h| ledger.block(h).expect("event heights exist").clone())
        .collect();
    let document_fingerprints = collect_fingerprints(&events);
    Ok(EvidenceBundle {
        contract,
        events,
        headers,
        blocks,
        document_fingerprints,
    })
}

/// Writes the bundle for `contract_id` to `output_path`.
pub fn export_evidence(
    ledger: &Ledger<Engine>,
    contract_id: ContractId,
    output_path: &Path,
) -> Result<EvidenceBundle, AuditError> {
    let bundle = build_evidence(ledger, contract_id)?;
    std::fs::write(output_path, bundle.to_file_bytes())?;
    Ok(bundle)
}

/// Checks the export digest, decodes the bundle and runs [`EvidenceBundle::check`].
pub fn verify_evidence_bytes(bytes: &[u8]) -> Result<EvidenceBundle, EvidenceError> {
    if bytes.len() < PREFIX_LEN + DIGEST_LEN {
        return Err(EvidenceError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(EvidenceError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(EvidenceError::UnsupportedVersion(bytes[4]));
    }
    let (signed, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if sha256(signed) != digest {
        return Err(EvidenceError::DigestMismatch);
    }
    let bundle = EvidenceBundle::from_canonical_bytes(&signed[PREFIX_LEN..])?;
    bundle.check()?;
    Ok(bundle)
}
