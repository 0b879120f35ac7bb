//! Audit tooling over a sealed ledger: per-contract reports, document-link
//! checks, event replay and dispute evidence export.
//!
//! Everything here reads only the event log and the blocks, never the
//! engine's internal state, so a report is a pure function of the ledger bytes.

mod evidence;
mod replay;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{ContractId, ContractState, Engine};
use crate::fingerprint::{fingerprint_document, Fingerprint, HashAlgorithm};
use crate::identity::Address;
use crate::ledger::{
    verify_chain, EventData, EventFilter, EventKind, Ledger, LedgerEvent, TxRef, VerificationReport,
};

pub use evidence::{
    build_evidence, export_evidence, verify_evidence_bytes, EvidenceBundle, EvidenceError,
};
pub use replay::{replay_events, replay_ledger, ReplayError, ReplayedState};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("unknown contract {0}")]
    UnknownContract(ContractId),
    #[error("event log is inconsistent: {0}")]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimelineEntry {
    pub kind: EventKind,
    pub height: u64,
    pub timestamp: u64,
    pub actor: Address,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferLine {
    pub sender: Address,
    pub receiver: Address,
    pub amount: u64,
    pub invoice_fingerprint: Fingerprint,
    pub tx_ref: TxRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectionTotal {
    pub from: Address,
    pub to: Address,
    pub amount: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type")]
pub enum Anomaly {
    /// Another contract registered the same document.
    DuplicateDocumentFingerprint {
        fingerprint: Fingerprint,
        other_contracts: Vec<ContractId>,
    },
    /// Informational: a payment made after one party had unsigned.
    TransferDuringPendingDeactivation { tx_ref: TxRef },
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anomaly::DuplicateDocumentFingerprint {
                fingerprint,
                other_contracts,
            } => {
                let ids: Vec<String> = other_contracts.iter().map(|c| c.to_string()).collect();
                write!(
                    f,
                    "document {fingerprint} also registered by contract(s) {}",
                    ids.join(", ")
                )
            }
            Anomaly::TransferDuringPendingDeactivation { tx_ref } => {
                write!(f, "transfer {tx_ref} made while deactivation was pending")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub contract_id: ContractId,
    pub participants: [Address; 2],
    pub creator: Address,
    pub document_fingerprint: Fingerprint,
    pub hash_method: HashAlgorithm,
    pub state: ContractState,
    pub timeline: Vec<TimelineEntry>,
    pub transfers: Vec<TransferLine>,
    pub integrity: VerificationReport,
    pub anomalies: Vec<Anomaly>,
}

impl AuditReport {
    /// Per-direction sums, recomputed from the transfer list.
    pub fn totals(&self) -> Vec<DirectionTotal> {
        let [a, b] = self.participants;
        [(a, b), (b, a)]
            .into_iter()
            .map(|(from, to)| DirectionTotal {
                from,
                to,
                amount: self
                    .transfers
                    .iter()
                    .filter(|t| t.sender == from && t.receiver == to)
                    .map(|t| u128::from(t.amount))
                    .sum(),
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct View<'a> {
            #[serde(flatten)]
            report: &'a AuditReport,
            totals: Vec<DirectionTotal>,
        }
        serde_json::to_value(View {
            report: self,
            totals: self.totals(),
        })
        .expect("audit report serializes")
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "contract {} ({})", self.contract_id, self.state)?;
        writeln!(
            f,
            "  participants: {} (creator), {}",
            self.participants[0], self.participants[1]
        )?;
        writeln!(f, "  document:     {}", self.document_fingerprint)?;
        writeln!(f, "timeline:")?;
        for entry in &self.timeline {
            writeln!(
                f,
                "  #{:<6} t={:<12} {:<20} {}",
                entry.height,
                entry.timestamp,
                entry.kind.name(),
                entry.actor
            )?;
        }
        writeln!(f, "transfers:")?;
        if self.transfers.is_empty() {
            writeln!(f, "  (none)")?;
        }
        for t in &self.transfers {
            writeln!(
                f,
                "  {:<8} {} -> {} {:>12}  invoice {}",
                t.tx_ref.to_string(),
                t.sender,
                t.receiver,
                t.amount,
                t.invoice_fingerprint
            )?;
        }
        writeln!(f, "totals:")?;
        for total in self.totals() {
            writeln!(f, "  {} -> {}: {}", total.from, total.to, total.amount)?;
        }
        match &self.integrity.failure {
            None => writeln!(
                f,
                "integrity: OK ({} blocks verified)",
                self.integrity.blocks_verified
            )?,
            Some(failure) => writeln!(f, "integrity: FAILED at {failure}")?,
        }
        writeln!(f, "anomalies:")?;
        if self.anomalies.is_empty() {
            writeln!(f, "  (none)")?;
        }
        for anomaly in &self.anomalies {
            writeln!(f, "  {anomaly}")?;
        }
        Ok(())
    }
}

/// Builds the audit report for one contract from the event log and blocks.
pub fn audit_contract(
    ledger: &Ledger<Engine>,
    contract_id: ContractId,
) -> Result<AuditReport, AuditError> {
    let events = ledger.get_events(EventFilter::contract(contract_id));
    if events.is_empty() {
        return Err(AuditError::UnknownContract(contract_id));
    }
    let record = replay::replay_contract(contract_id, &events)?;
    let document_fingerprint = record.document_fingerprint;

    let timeline = events
        .iter()
        .map(|e| TimelineEntry {
            kind: e.kind(),
            height: e.tx_ref.height,
            timestamp: ledger
                .block(e.tx_ref.height)
                .map(|b| b.timestamp)
                .unwrap_or_default(),
            actor: e.actor,
        })
        .collect();

    let mut transfers = Vec::new();
    let mut anomalies = Vec::new();
    let mut unsigned = 0usize;
    for event in &events {
        match &event.data {
            EventData::ContractUnsigned => unsigned += 1,
            EventData::ContractTransfer {
                sender,
                receiver,
                amount,
                invoice_fingerprint,
            } => {
                if unsigned > 0 {
                    anomalies.push(Anomaly::TransferDuringPendingDeactivation {
                        tx_ref: event.tx_ref,
                    });
                }
                transfers.push(TransferLine {
                    sender: *sender,
                    receiver: *receiver,
                    amount: *amount,
                    invoice_fingerprint: *invoice_fingerprint,
                    tx_ref: event.tx_ref,
                });
            }
            _ => {}
        }
    }

    let duplicates = duplicate_documents(ledger.events());
    if let Some(ids) = duplicates.get(&document_fingerprint) {
        let other_contracts: Vec<ContractId> = ids
            .iter()
            .copied()
            .filter(|&id| id != contract_id)
            .collect();
        if !other_contracts.is_empty() {
            anomalies.insert(
                0,
                Anomaly::DuplicateDocumentFingerprint {
                    fingerprint: document_fingerprint,
                    other_contracts,
                },
            );
        }
    }

    Ok(AuditReport {
        contract_id,
        participants: record.participants,
        creator: record.creator,
        document_fingerprint,
        hash_method: record.hash_method,
        state: record.state,
        timeline,
        transfers,
        integrity: verify_chain(ledger),
        anomalies,
    })
}

/// Document fingerprint -> ids of every contract registering it.
fn duplicate_documents(events: &[LedgerEvent]) -> BTreeMap<Fingerprint, Vec<ContractId>> {
    let mut by_document: BTreeMap<Fingerprint, Vec<ContractId>> = BTreeMap::new();
    for event in events {
        if let EventData::ContractCreated {
            document_fingerprint,
            ..
        } = &event.data
        {
            by_document
                .entry(*document_fingerprint)
                .or_default()
                .push(event.contract_id);
        }
    }
    by_document
}

/// True iff `document` hashes, under the contract's registered method, to
/// the registered document fingerprint.
pub fn verify_document_link(
    ledger: &Ledger<Engine>,
    contract_id: ContractId,
    document: &[u8],
) -> Result<bool, AuditError> {
    let events =
        ledger.get_events(EventFilter::contract(contract_id).with_kind(EventKind::ContractCreated));
    match events.first().map(|e| &e.data) {
        Some(EventData::ContractCreated {
            document_fingerprint,
            hash_method,
            ..
        }) => Ok(fingerprint_document(document, *hash_method) == *document_fingerprint),
        _ => Err(AuditError::UnknownContract(contract_id)),
    }
}
