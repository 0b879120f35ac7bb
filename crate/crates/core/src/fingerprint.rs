//! Content-addressed document fingerprints.
//!
//! A fingerprint is an algorithm-tagged 32-byte digest of a document's exact
//! bytes. There is no normalization: the bytes are the document. The text form
//! is `<algorithm>:<64 lowercase hex>`, e.g. `sha-256:e3b0c442...`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use sha3::Keccak256;
use thiserror::Error;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};

pub const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("unsupported hash method `{0}` (expected sha-256 or keccak-256)")]
    UnsupportedAlgorithm(String),
    #[error("malformed fingerprint `{0}`")]
    Malformed(String),
}

/// Supported document hashing methods.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HashAlgorithm {
    #[default]
    Sha256,
    Keccak256,
}

impl HashAlgorithm {
    pub const ALL: [HashAlgorithm; 2] = [HashAlgorithm::Sha256, HashAlgorithm::Keccak256];

    pub fn id(self) -> &'static str {
        match self {
            HashAlgorithm::Sha256 => "sha-256",
            HashAlgorithm::Keccak256 => "keccak-256",
        }
    }

    pub fn digest(self, bytes: &[u8]) -> [u8; DIGEST_LEN] {
        match self {
            HashAlgorithm::Sha256 => Sha256::digest(bytes).into(),
            HashAlgorithm::Keccak256 => Keccak256::digest(bytes).into(),
        }
    }

    fn tag(self) -> u8 {
        match self {
            HashAlgorithm::Sha256 => 1,
            HashAlgorithm::Keccak256 => 2,
        }
    }
}

impl fmt::Display for HashAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for HashAlgorithm {
    type Err = FingerprintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HashAlgorithm::ALL
            .into_iter()
            .find(|alg| alg.id() == s)
            .ok_or_else(|| FingerprintError::UnsupportedAlgorithm(s.to_string()))
    }
}

impl Canonical for HashAlgorithm {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u8(self.tag());
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            1 => Ok(HashAlgorithm::Sha256),
            2 => Ok(HashAlgorithm::Keccak256),
            tag => Err(CodecError::InvalidTag {
                what: "hash algorithm",
                tag,
            }),
        }
    }
}

impl Serialize for HashAlgorithm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for HashAlgorithm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Algorithm-tagged digest of a document.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint {
    algorithm: HashAlgorithm,
    digest: [u8; DIGEST_LEN],
}

impl Fingerprint {
    pub fn new(algorithm: HashAlgorithm, digest: [u8; DIGEST_LEN]) -> Self {
        Self { algorithm, digest }
    }

    pub fn algorithm(&self) -> HashAlgorithm {
        self.algorithm
    }

    pub fn digest(&self) -> &[u8; DIGEST_LEN] {
        &self.digest
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.algorithm, hex::encode(self.digest))
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

impl FromStr for Fingerprint {
    type Err = FingerprintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (alg, hex_digest) = s
            .split_once(':')
            .ok_or_else(|| FingerprintError::Malformed(s.to_string()))?;
        let algorithm: HashAlgorithm = alg.parse()?;
        // Only the canonical lowercase form is accepted so text round-trips exactly.
        if hex_digest.len() != 2 * DIGEST_LEN
            || !hex_digest
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        {
            return Err(FingerprintError::Malformed(s.to_string()));
        }
        let mut digest = [0u8; DIGEST_LEN];
        hex::decode_to_slice(hex_digest, &mut digest)
            .map_err(|_| FingerprintError::Malformed(s.to_string()))?;
        Ok(Self { algorithm, digest })
    }
}

impl Canonical for Fingerprint {
    fn encode(&self, enc: &mut Encoder) {
        enc.put(&self.algorithm);
        enc.put_raw(&self.digest);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            algorithm: dec.get()?,
            digest: dec.array()?,
        })
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fingerprints exactly the supplied bytes under `algorithm`.
pub fn fingerprint_document(document: &[u8], algorithm: HashAlgorithm) -> Fingerprint {
    Fingerprint::new(algorithm, algorithm.digest(document))
}

/// Like [`fingerprint_document`], resolving the algorithm from its text id.
pub fn fingerprint_document_with(
    document: &[u8],
    algorithm_id: &str,
) -> Result<Fingerprint, FingerprintError> {
    Ok(fingerprint_document(document, algorithm_id.parse()?))
}

pub fn verify_fingerprint(document: &[u8], expected: &Fingerprint) -> bool {
    fingerprint_document(document, expected.algorithm) == *expected
}

/// SHA-256 over `bytes`; the digest used for block and bundle hashing.
pub(crate) fn sha256(bytes: &[u8]) -> [u8; DIGEST_LEN] {
    Sha256::digest(bytes).into()
}
