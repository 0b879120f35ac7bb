use std::fmt;

use serde::Serialize;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::engine::{ContractId, Invoice};
use crate::fingerprint::{Fingerprint, HashAlgorithm};
use crate::identity::{Address, KeyPair, PublicKey, Signature};

/// Domain separator prepended to every signed transaction body.
const SIGNING_DOMAIN: &[u8] = b"MHC-TX\x01";

/// Position of a transaction: block height and index within the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TxRef {
    pub height: u64,
    pub index: u32,
}

impl TxRef {
    pub fn new(height: u64, index: u32) -> Self {
        Self { height, index }
    }
}

impl fmt::Display for TxRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.height, self.index)
    }
}

impl Canonical for TxRef {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u64(self.height);
        enc.put_u32(self.index);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            height: dec.u64()?,
            index: dec.u32()?,
        })
    }
}

/// One variant per ledger mutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    GenesisAllocation {
        account: Address,
        amount: u64,
    },
    CreateContract {
        counterparty: Address,
        document_fingerprint: Fingerprint,
        hash_method: HashAlgorithm,
    },
    SignContract {
        contract_id: ContractId,
    },
    Transfer {
        invoice: Invoice,
    },
    Unsign {
        contract_id: ContractId,
    },
}

impl Payload {
    pub fn name(&self) -> &'static str {
        match self {
            Payload::GenesisAllocation { .. } => "GenesisAllocation",
            Payload::CreateContract { .. } => "CreateContract",
            Payload::SignContract { .. } => "SignContract",
            Payload::Transfer { .. } => "Transfer",
            Payload::Unsign { .. } => "Unsign",
        }
    }
}

impl Canonical for Payload {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Payload::GenesisAllocation { account, amount } => {
                enc.put_u8(0);
                enc.put(account);
                enc.put_u64(*amount);
            }
            Payload::CreateContract {
                counterparty,
                document_fingerprint,
                hash_method,
            } => {
                enc.put_u8(1);
                enc.put(counterparty);
                enc.put(document_fingerprint);
                enc.put(hash_method);
            }
            Payload::SignContract { contract_id } => {
                enc.put_u8(2);
                enc.put(contract_id);
            }
            Payload::Transfer { invoice } => {
                enc.put_u8(3);
                enc.put(invoice);
            }
            Payload::Unsign { contract_id } => {
                enc.put_u8(4);
                enc.put(contract_id);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(match dec.u8()? {
            0 => Payload::GenesisAllocation {
                account: dec.get()?,
                amount: dec.u64()?,
            },
            1 => Payload::CreateContract {
                counterparty: dec.get()?,
                document_fingerprint: dec.get()?,
                hash_method: dec.get()?,
            },
            2 => Payload::SignContract {
                contract_id: dec.get()?,
            },
            3 => Payload::Transfer {
                invoice: dec.get()?,
            },
            4 => Payload::Unsign {
                contract_id: dec.get()?,
            },
            tag => {
                return Err(CodecError::InvalidTag {
                    what: "payload",
                    tag,
                })
            }
        })
    }
}

/// Authorization attached to a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Witness {
    /// Genesis allocations are authorized by being in block 0.
    Genesis,
    Signed {
        public_key: PublicKey,
        signature: Signature,
    },
}

impl Canonical for Witness {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Witness::Genesis => enc.put_u8(0),
            Witness::Signed {
                public_key,
                signature,
            } => {
                enc.put_u8(1);
                enc.put(public_key);
                enc.put(signature);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            0 => Ok(Witness::Genesis),
            1 => Ok(Witness::Signed {
                public_key: dec.get()?,
                signature: dec.get()?,
            }),
            tag => Err(CodecError::InvalidTag {
                what: "witness",
                tag,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transaction {
    pub nonce: u64,
    pub sender: Address,
    pub payload: Payload,
    pub witness: Witness,
}

impl Transaction {
    pub fn genesis(account: Address, amount: u64) -> Self {
        Self {
            nonce: 0,
            sender: Address::from_bytes([0u8; 20]),
            payload: Payload::GenesisAllocation { account, amount },
            witness: Witness::Genesis,
        }
    }

    /// Builds and signs a transaction from `key_pair`'s address.
    pub fn signed(key_pair: &KeyPair, nonce: u64, payload: Payload) -> Self {
        let sender = key_pair.address();
        let signature = key_pair.sign(&signing_bytes(nonce, &sender, &payload));
        Self {
            nonce,
            sender,
            payload,
            witness: Witness::Signed {
                public_key: key_pair.public_key(),
                signature,
            },
        }
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        signing_bytes(self.nonce, &self.sender, &self.payload)
    }

    /// True when the witness is a valid signature by a key whose address is `sender`.
    pub fn has_valid_signature(&self) -> bool {
        match &self.witness {
            Witness::Genesis => false,
            Witness::Signed {
                public_key,
                signature,
            } => {
                public_key.address() == self.sender
                    && public_key.verify(&self.signing_bytes(), signature)
            }
        }
    }
}

/// Bytes covered by a transaction signature: domain, nonce, sender, payload.
pub fn signing_bytes(nonce: u64, sender: &Address, payload: &Payload) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.put_raw(SIGNING_DOMAIN);
    enc.put_u64(nonce);
    enc.put(sender);
    enc.put(payload);
    enc.into_bytes()
}

impl Canonical for Transaction {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u64(self.nonce);
        enc.put(&self.sender);
        enc.put(&self.payload);
        enc.put(&self.witness);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            nonce: dec.u64()?,
            sender: dec.get()?,
            payload: dec.get()?,
            witness: dec.get()?,
        })
    }
}
