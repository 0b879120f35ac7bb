//! On-disk ledger format.
//!
//! Ledger file: `"MHCL"`, version `0x01`, a flags byte (bit 0: logical clock),
//! then one frame per block: big-endian `u32` length followed by the block's
//! canonical encoding. The file is only ever appended to.
//!
//! Two sidecars live next to it:
//!
//! - `<ledger>.tip`: `"MHCT"`, version, flags, tip height (`u64`), tip hash.
//!   Replaced atomically after each append; lets verification notice a
//!   removed suffix.
//! - `<ledger>.jsonl`: one JSON object per block with its events. Debug aid
//!   only; the binary file is authoritative.

use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::block::{Block, BlockHash};
use super::event::LedgerEvent;
use super::ClockMode;
use crate::codec::{Canonical, CodecError, Decoder};

pub const LEDGER_MAGIC: &[u8; 4] = b"MHCL";
pub const LEDGER_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 6;
const FLAG_LOGICAL_CLOCK: u8 = 0x01;

const TIP_MAGIC: &[u8; 4] = b"MHCT";
const TIP_VERSION: u8 = 0x01;
const TIP_LEN: usize = 4 + 1 + 1 + 8 + 32;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("ledger file {0} already exists")]
    AlreadyExists(PathBuf),
    #[error("ledger file {0} is locked by another process")]
    Locked(PathBuf),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode_header(clock: ClockMode) -> [u8; HEADER_LEN] {
    let mut out = [0u8; HEADER_LEN];
    out[..4].copy_from_slice(LEDGER_MAGIC);
    out[4] = LEDGER_VERSION;
    out[5] = clock_flags(clock);
    out
}

fn clock_flags(clock: ClockMode) -> u8 {
    match clock {
        ClockMode::Logical => FLAG_LOGICAL_CLOCK,
        ClockMode::Wall => 0,
    }
}

fn clock_from_flags(flags: u8) -> Result<ClockMode, String> {
    match flags {
        0 => Ok(ClockMode::Wall),
        FLAG_LOGICAL_CLOCK => Ok(ClockMode::Logical),
        other => Err(format!("unknown header flags {other:#04x}")),
    }
}

pub fn decode_header(bytes: &[u8]) -> Result<ClockMode, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("file shorter than the {HEADER_LEN}-byte header"));
    }
    if &bytes[..4] != LEDGER_MAGIC {
        return Err("bad magic".into());
    }
    if bytes[4] != LEDGER_VERSION {
        return Err(format!("unsupported version {:#04x}", bytes[4]));
    }
    clock_from_flags(bytes[5])
}

pub fn encode_frame(block: &Block) -> Vec<u8> {
    let body = block.to_canonical_bytes();
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Iterates over the block frames after the header. Frame `i` is expected at height `i`.
pub struct FrameReader<'a> {
    dec: Decoder<'a>,
}

impl<'a> FrameReader<'a> {
    pub fn new(body: &'a [u8]) -> Self {
        Self {
            dec: Decoder::new(body),
        }
    }
}

impl Iterator for FrameReader<'_> {
    type Item = Result<Block, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.dec.is_empty() {
            return None;
        }
        let frame = match self.dec.bytes() {
            Ok(frame) => frame,
            Err(e) => {
                // Framing is lost; stop after reporting.
                let rest = self.dec.remaining();
                let _ = self.dec.take(rest);
                return Some(Err(e));
            }
        };
        Some(Block::from_canonical_bytes(frame))
    }
}

/// Last sealed block as recorded in the tip sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TipRecord {
    pub clock: ClockMode,
    pub height: u64,
    pub block_hash: BlockHash,
}

impl TipRecord {
    pub fn encode(&self) -> [u8; TIP_LEN] {
        let mut out = [0u8; TIP_LEN];
        out[..4].copy_from_slice(TIP_MAGIC);
        out[4] = TIP_VERSION;
        out[5] = clock_flags(self.clock);
        out[6..14].copy_from_slice(&self.height.to_be_bytes());
        out[14..].copy_from_slice(self.block_hash.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() != TIP_LEN || &bytes[..4] != TIP_MAGIC || bytes[4] != TIP_VERSION {
            return Err("malformed tip record".into());
        }
        let mut hash = [0u8; 32];
        hash.copy_from_slice(&bytes[14..]);
        Ok(Self {
            clock: clock_from_flags(bytes[5])?,
            height: u64::from_be_bytes(bytes[6..14].try_into().expect("8 bytes")),
            block_hash: BlockHash::from_bytes(hash),
        })
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name: OsString = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn tip_path(ledger_path: &Path) -> PathBuf {
    sidecar(ledger_path, ".tip")
}

pub fn jsonl_path(ledger_path: &Path) -> PathBuf {
    sidecar(ledger_path, ".jsonl")
}

#[derive(Serialize)]
struct JsonBlock<'a> {
    #[serde(flatten)]
    block: &'a Block,
    events: &'a [LedgerEvent],
}

pub fn json_line(block: &Block, events: &[LedgerEvent]) -> String {
    let mut line = serde_json::to_string(&JsonBlock { block, events })
        .expect("ledger types serialize to JSON");
    line.push('\n');
    line
}

/// Open handle on a ledger file and its sidecars.
/// An opened store with the ledger file's bytes and the tip record's, if any.
pub(crate) type Opened = (LedgerStore, Vec<u8>, Option<Vec<u8>>);

#[derive(Debug)]
pub(crate) struct LedgerStore {
    path: PathBuf,
    file: File,
    clock: ClockMode,
    writable: bool,
}

impl LedgerStore {
    /// Creates a new ledger file holding only the genesis block.
    pub fn create(
        path: &Path,
        clock: ClockMode,
        genesis: &Block,
        events: &[LedgerEvent],
    ) -> Result<Self, StoreError> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(|e| match e.kind() {
                io::ErrorKind::AlreadyExists => StoreError::AlreadyExists(path.to_path_buf()),
                _ => StoreError::Io(e),
            })?;
        lock(&file, path, true)?;
        let mut bytes = encode_header(clock).to_vec();
        bytes.extend_from_slice(&encode_frame(genesis));
        file.write_all(&bytes)?;
        file.sync_data()?;
        let store = Self {
            path: path.to_path_buf(),
            file,
            clock,
            writable: true,
        };
        fs::write(jsonl_path(path), json_line(genesis, events))?;
        store.write_tip(genesis)?;
        Ok(store)
    }

    /// Opens an existing ledger and returns its bytes. Writers take an exclusive
    /// lock, readers a shared one.
    pub fn open(path: &Path, writable: bool) -> Result<Opened, StoreError> {
        let file = OpenOptions::new().read(true).write(writable).open(path)?;
        lock(&file, path, writable)?;
        let bytes = fs::read(path)?;
        let tip = match fs::read(tip_path(path)) {
            Ok(tip) => Some(tip),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let clock = decode_header(&bytes).unwrap_or(ClockMode::Wall);
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
                clock,
                writable,
            },
            bytes,
            tip,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends a block. Either the block frame, tip and JSON line are all
    /// written, or the files are rolled back to their previous lengths.
    pub fn append(&mut self, block: &Block, events: &[LedgerEvent]) -> Result<(), StoreError> {
        if !self.writable {
            return Err(StoreError::Io(io::Error::new(
                io::ErrorKind::PermissionDenied,
                "ledger opened read-only",
            )));
        }
        let ledger_len = self.file.seek(SeekFrom::End(0))?;
        let json_file_path = jsonl_path(&self.path);
        let mut json_file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&json_file_path)?;
        let json_len = json_file.metadata()?.len();

        let result = (|| -> io::Result<()> {
            self.file.write_all(&encode_frame(block))?;
            self.file.sync_data()?;
            json_file.write_all(json_line(block, events).as_bytes())?;
            self.write_tip(block)
        })();

        if let Err(e) = result {
            let _ = self.file.set_len(ledger_len);
            let _ = json_file.set_len(json_len);
            return Err(e.into());
        }
        Ok(())
    }

    fn write_tip(&self, block: &Block) -> io::Result<()> {
        let record = TipRecord {
            clock: self.clock,
            height: block.height,
            block_hash: block.block_hash,
        };
        let final_path = tip_path(&self.path);
        let tmp = sidecar(&self.path, ".tip.tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&record.encode())?;
            f.sync_data()?;
        }
        fs::rename(tmp, final_path)
    }
}

fn lock(file: &File, path: &Path, exclusive: bool) -> Result<(), StoreError> {
    let result = if exclusive {
        file.try_lock()
    } else {
        file.try_lock_shared()
    };
    match result {
        Ok(()) => Ok(()),
        Err(fs::TryLockError::WouldBlock) => Err(StoreError::Locked(path.to_path_buf())),
        Err(fs::TryLockError::Error(e)) => Err(StoreError::Io(e)),
    }
}
