//! Resolves where the ledger and key store live.
//!
//! Precedence: command-line flag, then `config.toml` in the home directory,
//! then the built-in default under the home directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use mhc_core::{ClockMode, HashAlgorithm};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    ledger_path: Option<PathBuf>,
    keystore_dir: Option<PathBuf>,
    clock_mode: Option<String>,
    default_hash_method: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub ledger_path: PathBuf,
    pub keystore_dir: PathBuf,
    pub clock_mode: ClockMode,
    pub default_hash_method: HashAlgorithm,
}

impl CliConfig {
    pub fn load(home: &Path, ledger: Option<PathBuf>, keystore: Option<PathBuf>) -> Result<Self> {
        let path = home.join("config.toml");
        let file = match std::fs::read_to_string(&path) {
            Ok(text) => toml::from_str::<ConfigFile>(&text)
                .with_context(|| format!("invalid config file {}", path.display()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => ConfigFile::default(),
            Err(e) => return Err(e).with_context(|| format!("cannot read {}", path.display())),
        };

        let under_home = |p: PathBuf| if p.is_absolute() { p } else { home.join(p) };
        let clock_mode = match file.clock_mode {
            Some(mode) => mode.parse().map_err(anyhow::Error::msg)?,
            None => ClockMode::default(),
        };
        let default_hash_method = match file.default_hash_method {
            Some(alg) => alg.parse()?,
            None => HashAlgorithm::default(),
        };
        Ok(Self {
            ledger_path: ledger
                .or(file.ledger_path.map(under_home))
                .unwrap_or_else(|| home.join("ledger.mhc")),
            keystore_dir: keystore
                .or(file.keystore_dir.map(under_home))
                .unwrap_or_else(|| home.join("keys")),
            clock_mode,
            default_hash_method,
        })
    }
}

/// `$HOME/.mhc`, or `.mhc` in the working directory when `HOME` is unset.
pub fn default_home() -> PathBuf {
    std::env::var_os("HOME")
        .map(|h| PathBuf::from(h).join(".mhc"))
        .unwrap_or_else(|| PathBuf::from(".mhc"))
}
