use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::fingerprint::{Fingerprint, HashAlgorithm};
use crate::identity::Address;

/// Sequential contract identifier, assigned in ledger order from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ContractId(pub u64);

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ContractId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(ContractId)
    }
}

impl Canonical for ContractId {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u64(self.0);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self(dec.u64()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ContractState {
    Pending,
    Active,
    PendingDeactivation,
    Deactivated,
}

impl ContractState {
    /// Transfers are allowed from activation until both parties have unsigned.
    pub fn accepts_transfers(self) -> bool {
        matches!(
            self,
            ContractState::Active | ContractState::PendingDeactivation
        )
    }

    /// The single legal successor state, if any.
    pub fn successor(self) -> Option<ContractState> {
        match self {
            ContractState::Pending => Some(ContractState::Active),
            ContractState::Active => Some(ContractState::PendingDeactivation),
            ContractState::PendingDeactivation => Some(ContractState::Deactivated),
            ContractState::Deactivated => None,
        }
    }

    fn tag(self) -> u8 {
        match self {
            ContractState::Pending => 0,
            ContractState::Active => 1,
            ContractState::PendingDeactivation => 2,
            ContractState::Deactivated => 3,
        }
    }
}

impl fmt::Display for ContractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContractState::Pending => "Pending",
            ContractState::Active => "Active",
            ContractState::PendingDeactivation => "PendingDeactivation",
            ContractState::Deactivated => "Deactivated",
        })
    }
}

impl Canonical for ContractState {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u8(self.tag());
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(match dec.u8()? {
            0 => ContractState::Pending,
            1 => ContractState::Active,
            2 => ContractState::PendingDeactivation,
            3 => ContractState::Deactivated,
            tag => {
                return Err(CodecError::InvalidTag {
                    what: "contract state",
                    tag,
                })
            }
        })
    }
}

/// On-ledger representation of a legal contract between two parties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContractRecord {
    pub contract_id: ContractId,
    /// Creator first, counterparty second.
    pub participants: [Address; 2],
    pub creator: Address,
    pub document_fingerprint: Fingerprint,
    pub hash_method: HashAlgorithm,
    pub signed_by: BTreeSet<Address>,
    pub unsigned_by: BTreeSet<Address>,
    pub state: ContractState,
}

impl ContractRecord {
    pub fn is_participant(&self, actor: &Address) -> bool {
        self.participants.contains(actor)
    }

    pub fn counterparty_of(&self, actor: &Address) -> Option<Address> {
        match self.participants {
            [a, b] if a == *actor => Some(b),
            [a, b] if b == *actor => Some(a),
            _ => None,
        }
    }

    /// The state implied by the signature sets, or `None` if the sets are
    /// inconsistent with every state.
    pub fn implied_state(&self) -> Option<ContractState> {
        let all_signed = self.participants.iter().all(|p| self.signed_by.contains(p));
        let foreign = self
            .signed_by
            .iter()
            .chain(&self.unsigned_by)
            .any(|a| !self.is_participant(a));
        if foreign || !self.signed_by.contains(&self.creator) {
            return None;
        }
        match (self.signed_by.len(), self.unsigned_by.len()) {
            (1, 0) => Some(ContractState::Pending),
            (2, 0) if all_signed => Some(ContractState::Active),
            (2, 1) if all_signed => Some(ContractState::PendingDeactivation),
            (2, 2) if all_signed => Some(ContractState::Deactivated),
            _ => None,
        }
    }
}

impl Canonical for ContractRecord {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.contract_id);
        enc.put(&self.participants[0]);
        enc.put(&self.participants[1]);
        enc.put(&self.creator);
        enc.put(&self.document_fingerprint);
        enc.put(&self.hash_method);
        let signed: Vec<Address> = self.signed_by.iter().copied().collect();
        let unsigned: Vec<Address> = self.unsigned_by.iter().copied().collect();
        enc.put_seq(&signed);
        enc.put_seq(&unsigned);
        enc.put(&self.state);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let contract_id = dec.get()?;
        let participants = [dec.get()?, dec.get()?];
        let creator = dec.get()?;
        let document_fingerprint = dec.get()?;
        let hash_method = dec.get()?;
        let signed: Vec<Address> = dec.seq()?;
        let unsigned: Vec<Address> = dec.seq()?;
        // Sets are written sorted; anything else is a second encoding of the same value.
        if !signed.windows(2).all(|w| w[0] < w[1]) || !unsigned.windows(2).all(|w| w[0] < w[1]) {
            return Err(CodecError::Invalid(
                "address set not strictly sorted".into(),
            ));
        }
        Ok(Self {
            contract_id,
            participants,
            creator,
            document_fingerprint,
            hash_method,
            signed_by: signed.into_iter().collect(),
            unsigned_by: unsigned.into_iter().collect(),
            state: dec.get()?,
        })
    }
}

/// Payment request against a contract, identified by its document fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Invoice {
    pub contract_id: ContractId,
    pub payee: Address,
    pub payer: Address,
    pub amount: u64,
    pub invoice_fingerprint: Fingerprint,
}

impl Canonical for Invoice {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.contract_id);
        enc.put(&self.payee);
        enc.put(&self.payer);
        enc.put_u64(self.amount);
        enc.put(&self.invoice_fingerprint);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            contract_id: dec.get()?,
            payee: dec.get()?,
            payer: dec.get()?,
            amount: dec.u64()?,
            invoice_fingerprint: dec.get()?,
        })
    }
}
