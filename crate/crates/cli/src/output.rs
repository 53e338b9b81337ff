//! Run directories: `report.json` plus CSV tables, written by one writer.

use std::fs;
use std::path::{Path, PathBuf};

use mildvol::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Metadata stamped on every report.
#[derive(Debug, Clone, Serialize)]
pub struct Stamp {
    pub command: String,
    pub version: &'static str,
    /// SHA-256 of the configuration bytes, or of the frozen built-in
    /// parameters for commands without a file.
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    stamp: &'a Stamp,
    /// Whether the command's acceptance threshold held, if it has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    passed: Option<bool>,
    result: &'a T,
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_report<T: Serialize>(&self, stamp: &Stamp, passed: Option<bool>, result: &T) -> Result<()> {
        let body = serde_json::to_string_pretty(&Envelope { stamp, passed, result })?;
        fs::write(self.path("report.json"), body + "\n")?;
        Ok(())
    }

    /// Writes `rows` under `header` to `name`.
    pub fn write_table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name)).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn create_file(&self, name: &str) -> Result<fs::File> {
        Ok(fs::File::create(self.path(name))?)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        Ok(fs::write(self.path(name), text)?)
    }
}

/// Formats an optional number, empty when absent.
pub fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
