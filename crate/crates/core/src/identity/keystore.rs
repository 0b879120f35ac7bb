//! One-file-per-identity key store.
//!
//! File layout: `"MHCK"`, version `0x01`, 32-byte seed, 32-byte public key.
//! Files are created owner-readable only and never overwritten.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{IdentityError, KeyPair, PUBLIC_KEY_LEN, SEED_LEN};

const MAGIC: &[u8; 4] = b"MHCK";
const VERSION: u8 = 0x01;
pub const KEY_FILE_LEN: usize = 4 + 1 + SEED_LEN + PUBLIC_KEY_LEN;
const EXTENSION: &str = "key";

pub fn encode_key_file(key_pair: &KeyPair) -> Vec<u8> {
    let mut out = Vec::with_capacity(KEY_FILE_LEN);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&key_pair.seed());
    out.extend_from_slice(&key_pair.public_key().to_bytes());
    out
}

pub fn decode_key_file(bytes: &[u8]) -> Result<KeyPair, IdentityError> {
    if bytes.len() != KEY_FILE_LEN {
        return Err(IdentityError::MalformedKeyFile(format!(
            "expected {KEY_FILE_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(IdentityError::MalformedKeyFile("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(IdentityError::MalformedKeyFile(format!(
            "unsupported version {:#04x}",
            bytes[4]
        )));
    }
    let key_pair = KeyPair::generate(Some(&bytes[5..5 + SEED_LEN]))?;
    if key_pair.public_key().to_bytes()[..] != bytes[5 + SEED_LEN..] {
        return Err(IdentityError::MalformedKeyFile(
            "public key does not match seed".into(),
        ));
    }
    Ok(key_pair)
}

/// Directory of `<name>.key` files.
#[derive(Debug, Clone)]
pub struct KeyStore {
    dir: PathBuf,
}

impl KeyStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, name: &str) -> Result<PathBuf, IdentityError> {
        validate_name(name)?;
        Ok(self.dir.join(format!("{name}.{EXTENSION}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.path_for(name).map(|p| p.exists()).unwrap_or(false)
    }

    /// Writes a new identity; fails if `name` is already taken.
    pub fn create(&self, name: &str, key_pair: &KeyPair) -> Result<PathBuf, IdentityError> {
        let path = self.path_for(name)?;
        fs::create_dir_all(&self.dir)?;
        let mut options = OpenOptions::new();
        options.write(true).create_new(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            options.mode(0o600);
        }
        let mut file = options.open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => IdentityError::NameTaken(name.to_string()),
            _ => IdentityError::Io(e),
        })?;
        file.write_all(&encode_key_file(key_pair))?;
        file.sync_all()?;
        Ok(path)
    }

    pub fn load(&self, name: &str) -> Result<KeyPair, IdentityError> {
        let path = self.path_for(name)?;
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => IdentityError::UnknownName(name.to_string()),
            _ => IdentityError::Io(e),
        })?;
        decode_key_file(&bytes)
    }

    /// Names of all stored identities, sorted.
    pub fn names(&self) -> Result<Vec<String>, IdentityError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut names = Vec::new();
        for entry in entries {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some(EXTENSION) {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    names.push(stem.to_string());
                }
            }
        }
        names.sort();
        Ok(names)
    }
}

fn validate_name(name: &str) -> Result<(), IdentityError> {
    let ok = !name.is_empty()
        && name.len() <= 64
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(IdentityError::InvalidName(name.to_string()))
    }
}
