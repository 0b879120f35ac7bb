//! Chain verification: recompute every block hash and link, replay every
//! transaction, and compare the result with what was stored.

use std::fmt;
use std::path::Path;

use serde::{Serialize, Serializer};
use thiserror::Error;

use super::block::BlockHeader;
use super::store::{decode_header, tip_path, FrameReader, TipRecord, HEADER_LEN};
use super::{Ledger, StateMachine};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FailureReason {
    #[error("bad file header: {0}")]
    BadHeader(String),
    #[error("undecodable block: {0}")]
    Decode(String),
    #[error("expected height {expected}, found {found}")]
    HeightMismatch { expected: u64, found: u64 },
    #[error("prev_hash does not match the previous block's hash")]
    BrokenLink,
    #[error("stored block hash does not match recomputed hash")]
    HashMismatch,
    #[error("invalid genesis block: {0}")]
    BadGenesis(String),
    #[error("bad timestamp: {0}")]
    Timestamp(String),
    #[error("bad block shape: {0}")]
    BlockShape(String),
    #[error("invalid transaction: {0}")]
    InvalidTransaction(String),
    #[error("file holds no blocks")]
    Empty,
    #[error("tip record missing")]
    MissingTip,
    #[error("malformed tip record: {0}")]
    BadTip(String),
    #[error("stored tip {stored_height} ({stored_hash}) does not match recomputed tip {recomputed_height} ({recomputed_hash})")]
    TipMismatch {
        stored_height: u64,
        stored_hash: String,
        recomputed_height: u64,
        recomputed_hash: String,
    },
    #[error("tip record clock mode differs from the file header")]
    ClockMismatch,
    #[error("replayed state differs from stored state: {0}")]
    StateMismatch(String),
}

impl Serialize for FailureReason {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// First inconsistency found, located by block height.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainFailure {
    pub height: u64,
    pub reason: FailureReason,
}

impl ChainFailure {
    fn at(height: u64, reason: FailureReason) -> Self {
        Self { height, reason }
    }
}

impl fmt::Display for ChainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "height {}: {}", self.height, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub blocks_verified: u64,
    /// Last block that passed verification.
    pub tip: Option<BlockHeader>,
    pub failure: Option<ChainFailure>,
}

impl VerificationReport {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Decodes and replays a ledger file image. Stops at the first failure.
pub(crate) fn rebuild<M: StateMachine>(
    bytes: &[u8],
    tip: Option<&[u8]>,
    machine: M,
) -> Result<Ledger<M>, ChainFailure> {
    rebuild_tracking(bytes, tip, machine, &mut None)
}

fn rebuild_tracking<M: StateMachine>(
    bytes: &[u8],
    tip: Option<&[u8]>,
    machine: M,
    verified: &mut Option<BlockHeader>,
) -> Result<Ledger<M>, ChainFailure> {
    let clock =
        decode_header(bytes).map_err(|e| ChainFailure::at(0, FailureReason::BadHeader(e)))?;
    let mut frames = FrameReader::new(&bytes[HEADER_LEN..]);

    let genesis = match frames.next() {
        None => return Err(ChainFailure::at(0, FailureReason::Empty)),
        Some(Err(e)) => return Err(ChainFailure::at(0, FailureReason::Decode(e.to_string()))),
        Some(Ok(block)) => block,
    };
    let mut ledger =
        Ledger::from_genesis(genesis, clock, machine).map_err(|r| ChainFailure::at(0, r))?;
    *verified = Some(ledger.tip());

    for (index, frame) in frames.enumerate() {
        let height = index as u64 + 1;
        let block =
            frame.map_err(|e| ChainFailure::at(height, FailureReason::Decode(e.to_string())))?;
        ledger
            .replay_block(block)
            .map_err(|r| ChainFailure::at(height, r))?;
        *verified = Some(ledger.tip());
    }

    let recomputed = ledger.tip();
    let stored = match tip {
        None => {
            return Err(ChainFailure::at(
                recomputed.height,
                FailureReason::MissingTip,
            ))
        }
        Some(raw) => TipRecord::decode(raw)
            .map_err(|e| ChainFailure::at(recomputed.height, FailureReason::BadTip(e)))?,
    };
    if stored.clock != clock {
        return Err(ChainFailure::at(0, FailureReason::ClockMismatch));
    }
    if stored.height != recomputed.height || stored.block_hash != recomputed.block_hash {
        // Point at the first block the two sides disagree on.
        let height = if stored.height == recomputed.height {
            stored.height
        } else {
            stored.height.min(recomputed.height) + 1
        };
        return Err(ChainFailure::at(
            height,
            FailureReason::TipMismatch {
                stored_height: stored.height,
                stored_hash: stored.block_hash.to_string(),
                recomputed_height: recomputed.height,
                recomputed_hash: recomputed.block_hash.to_string(),
            },
        ));
    }
    Ok(ledger)
}

/// Verifies a ledger file image against its tip record.
pub fn verify_ledger_bytes<M: StateMachine + Default>(
    bytes: &[u8],
    tip: Option<&[u8]>,
) -> VerificationReport {
    let mut verified = None;
    let result = rebuild_tracking(bytes, tip, M::default(), &mut verified);
    let blocks_verified = verified.map_or(0, |h| h.height + 1);
    match result {
        Ok(ledger) => VerificationReport {
            blocks_verified,
            tip: Some(ledger.tip()),
            failure: None,
        },
        Err(failure) => VerificationReport {
            blocks_verified,
            tip: verified,
            failure: Some(failure),
        },
    }
}

/// Verifies the ledger file at `path` and its tip sidecar. No lock is taken.
pub fn verify_ledger_file<M: StateMachine + Default>(
    path: &Path,
) -> std::io::Result<VerificationReport> {
    let bytes = std::fs::read(path)?;
    let tip = match std::fs::read(tip_path(path)) {
        Ok(tip) => Some(tip),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e),
    };
    Ok(verify_ledger_bytes::<M>(&bytes, tip.as_deref()))
}

/// Verifies an in-memory ledger: every hash and link is recomputed, every
/// transaction replayed from genesis, and the replayed balances, nonces,
/// events and machine state compared with the live ones.
pub fn verify_chain<M: StateMachine + Default + PartialEq>(
    ledger: &Ledger<M>,
) -> VerificationReport {
    let bytes = ledger.to_file_bytes();
    let tip = ledger.tip_record().encode();
    let mut verified = None;
    let result = rebuild_tracking(&bytes, Some(&tip), M::default(), &mut verified);
    let blocks_verified = verified.map_or(0, |h| h.height + 1);
    let failure = match result {
        Err(failure) => Some(failure),
        Ok(replayed) => {
            let height = ledger.height();
            let mismatch = if replayed.accounts != ledger.accounts {
                Some("balances")
            } else if replayed.nonces != ledger.nonces {
                Some("nonces")
            } else if replayed.events != ledger.events {
                Some("event log")
            } else if replayed.machine != ledger.machine {
                Some("contract state")
            } else {
                None
            };
            mismatch.map(|what| {
                ChainFailure::at(height, FailureReason::StateMismatch(what.to_string()))
            })
        }
    };
    VerificationReport {
        blocks_verified,
        tip: verified,
        failure,
    }
}
