//! Participant identities.
//!
//! An identity is an Ed25519 keypair. Its [`Address`] is the last 20 bytes of
//! SHA-256 over the 32-byte public key and is how the ledger names actors.
//! Everything here is pure, so it can be shared freely across threads.

mod keystore;

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use rand::rngs::OsRng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::fingerprint::sha256;

pub use keystore::{decode_key_file, encode_key_file, KeyStore, KEY_FILE_LEN};

pub const SEED_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;
pub const ADDRESS_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error("seed must be {SEED_LEN} bytes, got {0}")]
    SeedLength(usize),
    #[error("malformed public key: {0}")]
    MalformedPublicKey(String),
    #[error("malformed address `{0}`")]
    MalformedAddress(String),
    #[error("malformed key file: {0}")]
    MalformedKeyFile(String),
    #[error("identity `{0}` already exists")]
    NameTaken(String),
    #[error("unknown identity `{0}`")]
    UnknownName(String),
    #[error("invalid identity name `{0}`")]
    InvalidName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Keys
// ---------------------------------------------------------------------------

/// Signing identity. The seed never leaves this type except through the key store.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    /// With a seed the keypair is fully determined by it; without one, fresh OS entropy is used.
    pub fn generate(seed: Option<&[u8]>) -> Result<Self, IdentityError> {
        let signing = match seed {
            Some(seed) => {
                let seed: [u8; SEED_LEN] = seed
                    .try_into()
                    .map_err(|_| IdentityError::SeedLength(seed.len()))?;
                SigningKey::from_bytes(&seed)
            }
            None => SigningKey::generate(&mut OsRng),
        };
        Ok(Self { signing })
    }

    pub fn from_seed(seed: [u8; SEED_LEN]) -> Self {
        Self {
            signing: SigningKey::from_bytes(&seed),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key())
    }

    pub fn address(&self) -> Address {
        self.public_key().address()
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature::Ed25519(self.signing.sign(message).to_bytes())
    }

    pub(crate) fn seed(&self) -> [u8; SEED_LEN] {
        self.signing.to_bytes()
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &self.public_key())
            .finish_non_exhaustive()
    }
}

/// Ed25519 verification key, validated on construction.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey(VerifyingKey);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        let raw: [u8; PUBLIC_KEY_LEN] = bytes.try_into().map_err(|_| {
            IdentityError::MalformedPublicKey(format!(
                "expected {PUBLIC_KEY_LEN} bytes, got {}",
                bytes.len()
            ))
        })?;
        VerifyingKey::from_bytes(&raw)
            .map(PublicKey)
            .map_err(|e| IdentityError::MalformedPublicKey(e.to_string()))
    }

    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        self.0.to_bytes()
    }

    pub fn address(&self) -> Address {
        let digest = sha256(self.0.as_bytes());
        let mut out = [0u8; ADDRESS_LEN];
        out.copy_from_slice(&digest[digest.len() - ADDRESS_LEN..]);
        Address(out)
    }

    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        match signature {
            Signature::Ed25519(bytes) => {
                let sig = ed25519_dalek::Signature::from_bytes(bytes);
                self.0.verify_strict(message, &sig).is_ok()
            }
        }
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(self.0.as_bytes()))
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0.as_bytes()))
    }
}

impl Canonical for PublicKey {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_raw(self.0.as_bytes());
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let raw: [u8; PUBLIC_KEY_LEN] = dec.array()?;
        PublicKey::from_bytes(&raw).map_err(|e| CodecError::Invalid(e.to_string()))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

// ---------------------------------------------------------------------------
// Signatures
// ---------------------------------------------------------------------------

/// Detached signature tagged with its scheme.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signature {
    Ed25519([u8; SIGNATURE_LEN]),
}

impl Signature {
    pub fn scheme_id(&self) -> &'static str {
        match self {
            Signature::Ed25519(_) => "ed25519",
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        match self {
            Signature::Ed25519(bytes) => bytes,
        }
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Signature({}:{})",
            self.scheme_id(),
            hex::encode(self.as_bytes())
        )
    }
}

impl Canonical for Signature {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Signature::Ed25519(bytes) => {
                enc.put_u8(1);
                enc.put_bytes(bytes);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            1 => {
                let raw = dec.bytes()?;
                let bytes: [u8; SIGNATURE_LEN] = raw.try_into().map_err(|_| {
                    CodecError::Invalid(format!("ed25519 signature of {} bytes", raw.len()))
                })?;
                Ok(Signature::Ed25519(bytes))
            }
            tag => Err(CodecError::InvalidTag {
                what: "signature scheme",
                tag,
            }),
        }
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!(
            "{}:{}",
            self.scheme_id(),
            hex::encode(self.as_bytes())
        ))
    }
}

// ---------------------------------------------------------------------------
// Addresses
// ---------------------------------------------------------------------------

/// 20-byte actor identifier; text form is 40 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address([u8; ADDRESS_LEN]);

impl Address {
    pub const fn from_bytes(bytes: [u8; ADDRESS_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; ADDRESS_LEN] {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({self})")
    }
}

impl FromStr for Address {
    type Err = IdentityError;

    /// Accepts 40 hex characters, optionally prefixed with `0x`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.strip_prefix("0x").unwrap_or(s);
        let mut out = [0u8; ADDRESS_LEN];
        if body.len() != 2 * ADDRESS_LEN {
            return Err(IdentityError::MalformedAddress(s.to_string()));
        }
        hex::decode_to_slice(body, &mut out)
            .map_err(|_| IdentityError::MalformedAddress(s.to_string()))?;
        Ok(Self(out))
    }
}

impl Canonical for Address {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_raw(&self.0);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self(dec.array()?))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Free-function surface
// ---------------------------------------------------------------------------

pub fn generate_keypair(seed: Option<&[u8]>) -> Result<KeyPair, IdentityError> {
    KeyPair::generate(seed)
}

/// Derives the address of raw public key bytes, rejecting malformed keys.
pub fn derive_address(public_key: &[u8]) -> Result<Address, IdentityError> {
    Ok(PublicKey::from_bytes(public_key)?.address())
}

pub fn sign_message(key_pair: &KeyPair, message: &[u8]) -> Signature {
    key_pair.sign(message)
}

pub fn verify_signature(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    public_key.verify(message, signature)
}
