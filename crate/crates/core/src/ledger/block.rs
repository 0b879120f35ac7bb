use std::fmt;

use serde::{Serialize, Serializer};

use super::transaction::Transaction;
use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::fingerprint::sha256;

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockHash([u8; 32]);

impl BlockHash {
    pub const ZERO: BlockHash = BlockHash([0u8; 32]);

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for BlockHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for BlockHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockHash({self})")
    }
}

impl Serialize for BlockHash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Canonical for BlockHash {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_raw(&self.0);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self(dec.array()?))
    }
}

/// A sealed block. `block_hash` is SHA-256 over the canonical encoding of
/// `(height, timestamp, prev_hash, transactions)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub height: u64,
    pub timestamp: u64,
    pub prev_hash: BlockHash,
    pub transactions: Vec<Transaction>,
    pub block_hash: BlockHash,
}

impl Block {
    pub fn seal(
        height: u64,
        timestamp: u64,
        prev_hash: BlockHash,
        transactions: Vec<Transaction>,
    ) -> Self {
        let block_hash = compute_block_hash(height, timestamp, &prev_hash, &transactions);
        Self {
            height,
            timestamp,
            prev_hash,
            transactions,
            block_hash,
        }
    }

    pub fn compute_hash(&self) -> BlockHash {
        compute_block_hash(
            self.height,
            self.timestamp,
            &self.prev_hash,
            &self.transactions,
        )
    }

    pub fn header(&self) -> BlockHeader {
        BlockHeader {
            height: self.height,
            timestamp: self.timestamp,
            prev_hash: self.prev_hash,
            block_hash: self.block_hash,
        }
    }
}

fn encode_hashed_part(
    enc: &mut Encoder,
    height: u64,
    timestamp: u64,
    prev_hash: &BlockHash,
    transactions: &[Transaction],
) {
    enc.put_u64(height);
    enc.put_u64(timestamp);
    enc.put(prev_hash);
    enc.put_seq(transactions);
}

pub fn compute_block_hash(
    height: u64,
    timestamp: u64,
    prev_hash: &BlockHash,
    transactions: &[Transaction],
) -> BlockHash {
    let mut enc = Encoder::new();
    encode_hashed_part(&mut enc, height, timestamp, prev_hash, transactions);
    BlockHash(sha256(enc.as_bytes()))
}

impl Canonical for Block {
    fn encode(&self, enc: &mut Encoder) {
        encode_hashed_part(
            enc,
            self.height,
            self.timestamp,
            &self.prev_hash,
            &self.transactions,
        );
        enc.put(&self.block_hash);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            height: dec.u64()?,
            timestamp: dec.u64()?,
            prev_hash: dec.get()?,
            transactions: dec.seq()?,
            block_hash: dec.get()?,
        })
    }
}

/// Block metadata without transactions; enough to check chain links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockHeader {
    pub height: u64,
    pub timestamp: u64,
    pub prev_hash: BlockHash,
    pub block_hash: BlockHash,
}

impl Canonical for BlockHeader {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u64(self.height);
        enc.put_u64(self.timestamp);
        enc.put(&self.prev_hash);
        enc.put(&self.block_hash);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            height: dec.u64()?,
            timestamp: dec.u64()?,
            prev_hash: dec.get()?,
            block_hash: dec.get()?,
        })
    }
}
