use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::transaction::TxRef;
use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::engine::ContractId;
use crate::fingerprint::{Fingerprint, HashAlgorithm};
use crate::identity::Address;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EventKind {
    ContractCreated,
    ContractSigned,
    ContractActivated,
    ContractTransfer,
    ContractUnsigned,
    ContractDeactivated,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::ContractCreated,
        EventKind::ContractSigned,
        EventKind::ContractActivated,
        EventKind::ContractTransfer,
        EventKind::ContractUnsigned,
        EventKind::ContractDeactivated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::ContractCreated => "ContractCreated",
            EventKind::ContractSigned => "ContractSigned",
            EventKind::ContractActivated => "ContractActivated",
            EventKind::ContractTransfer => "ContractTransfer",
            EventKind::ContractUnsigned => "ContractUnsigned",
            EventKind::ContractDeactivated => "ContractDeactivated",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = String;

    /// Accepts the full name (`ContractSigned`) or its short form (`signed`), case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.to_ascii_lowercase();
        EventKind::ALL
            .into_iter()
            .find(|k| {
                let full = k.name().to_ascii_lowercase();
                full == wanted || full.strip_prefix("contract") == Some(wanted.as_str())
            })
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// Kind-specific event fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum EventData {
    ContractCreated {
        participants: [Address; 2],
        creator: Address,
        document_fingerprint: Fingerprint,
        hash_method: HashAlgorithm,
    },
    ContractSigned,
    ContractActivated,
    ContractTransfer {
        sender: Address,
        receiver: Address,
        amount: u64,
        invoice_fingerprint: Fingerprint,
    },
    ContractUnsigned,
    ContractDeactivated,
}

impl EventData {
    pub fn kind(&self) -> EventKind {
        match self {
            EventData::ContractCreated { .. } => EventKind::ContractCreated,
            EventData::ContractSigned => EventKind::ContractSigned,
            EventData::ContractActivated => EventKind::ContractActivated,
            EventData::ContractTransfer { .. } => EventKind::ContractTransfer,
            EventData::ContractUnsigned => EventKind::ContractUnsigned,
            EventData::ContractDeactivated => EventKind::ContractDeactivated,
        }
    }
}

/// Append-only audit record, linked to the transaction that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerEvent {
    pub contract_id: ContractId,
    pub actor: Address,
    #[serde(flatten)]
    pub data: EventData,
    pub tx_ref: TxRef,
}

impl LedgerEvent {
    pub fn kind(&self) -> EventKind {
        self.data.kind()
    }
}

impl Canonical for LedgerEvent {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.contract_id);
        enc.put(&self.actor);
        match &self.data {
            EventData::ContractCreated {
                participants,
                creator,
                document_fingerprint,
                hash_method,
            } => {
                enc.put_u8(0);
                enc.put(&participants[0]);
                enc.put(&participants[1]);
                enc.put(creator);
                enc.put(document_fingerprint);
                enc.put(hash_method);
            }
            EventData::ContractSigned => enc.put_u8(1),
            EventData::ContractActivated => enc.put_u8(2),
            EventData::ContractTransfer {
                sender,
                receiver,
                amount,
                invoice_fingerprint,
            } => {
                enc.put_u8(3);
                enc.put(sender);
                enc.put(receiver);
                enc.put_u64(*amount);
                enc.put(invoice_fingerprint);
            }
            EventData::ContractUnsigned => enc.put_u8(4),
            EventData::ContractDeactivated => enc.put_u8(5),
        }
        enc.put(&self.tx_ref);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let contract_id = dec.get()?;
        let actor = dec.get()?;
        let data = match dec.u8()? {
            0 => EventData::ContractCreated {
                participants: [dec.get()?, dec.get()?],
                creator: dec.get()?,
                document_fingerprint: dec.get()?,
                hash_method: dec.get()?,
            },
            1 => EventData::ContractSigned,
            2 => EventData::ContractActivated,
            3 => EventData::ContractTransfer {
                sender: dec.get()?,
                receiver: dec.get()?,
                amount: dec.u64()?,
                invoice_fingerprint: dec.get()?,
            },
            4 => EventData::ContractUnsigned,
            5 => EventData::ContractDeactivated,
            tag => return Err(CodecError::InvalidTag { what: "event", tag }),
        };
        Ok(Self {
            contract_id,
            actor,
            data,
            tx_ref: dec.get()?,
        })
    }
}

/// Event query; `None` fields match everything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub contract_id: Option<ContractId>,
    pub kind: Option<EventKind>,
}

impl EventFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn contract(contract_id: ContractId) -> Self {
        Self {
            contract_id: Some(contract_id),
            kind: None,
        }
    }

    pub fn with_kind(mut self, kind: EventKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn matches(&self, event: &LedgerEvent) -> bool {
        self.contract_id.is_none_or(|id| event.contract_id == id)
            && self.kind.is_none_or(|k| event.kind() == k)
    }
}
