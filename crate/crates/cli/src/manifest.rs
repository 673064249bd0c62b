//! Per-run record of what was read, what was written and how to redo it.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use affect_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::AppConfig;

pub const RUN_MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    /// Replays the run from the resolved config written next to this file.
    pub rerun: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: AppConfig,
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if m.format_version != RUN_MANIFEST_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported run manifest version {}",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }
}
