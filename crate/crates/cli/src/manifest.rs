//! `manifest.json`: everything needed to rerun a command bit-exactly, plus
//! digests of the files it wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use mstboot::{PanelFormat, SynthSpec};

use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileRecord {
    fn of(path: &Path, label: String) -> Result<Self, Failure> {
        let data = fs::read(path)
            .map_err(|e| Failure::stage("manifest", format!("{}: {e}", path.display())))?;
        Ok(FileRecord {
            path: label,
            bytes: data.len() as u64,
            sha256: format!("{:x}", Sha256::digest(&data)),
        })
    }

    fn input(path: &Path) -> Result<Self, Failure> {
        Self::of(path, path.display().to_string())
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Source {
    Synthetic {
        spec: SynthSpec,
    },
    Panel {
        file: FileRecord,
        format: PanelFormat,
    },
    Prices {
        open: FileRecord,
        close: FileRecord,
        format: PanelFormat,
    },
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub source: Source,
    /// `None` means planted sectors (synthetic) or no sector map.
    pub sectors: Option<FileRecord>,
}

impl InputRecord {
    pub fn synthetic(spec: SynthSpec) -> Self {
        InputRecord {
            source: Source::Synthetic { spec },
            sectors: None,
        }
    }

    pub fn panel(path: &Path, format: PanelFormat) -> Result<Self, Failure> {
        Ok(InputRecord {
            source: Source::Panel {
                file: FileRecord::input(path)?,
                format,
            },
            sectors: None,
        })
    }

    pub fn prices(open: &Path, close: &Path, format: PanelFormat) -> Result<Self, Failure> {
        Ok(InputRecord {
            source: Source::Prices {
                open: FileRecord::input(open)?,
                close: FileRecord::input(close)?,
                format,
            },
            sectors: None,
        })
    }

    pub fn with_sectors(mut self, path: &Path) -> Result<Self, Failure> {
        self.sectors = Some(FileRecord::input(path)?);
        Ok(self)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub created_unix: u64,
    pub input: InputRecord,
    pub parameters: Value,
    pub outputs: Vec<FileRecord>,
}

impl Manifest {
    /// Output paths are recorded relative to `out`, sorted.
    pub fn new(
        command: &'static str,
        input: InputRecord,
        parameters: Value,
        out: &Path,
        written: &mut [PathBuf],
    ) -> Result<Self, Failure> {
        written.sort();
        let outputs = written
            .iter()
            .map(|p| {
                let label = p.strip_prefix(out).unwrap_or(p).display().to_string();
                FileRecord::of(p, label)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            input,
            parameters,
            outputs,
        })
    }

    pub fn write(&self, out: &Path) -> Result<(), Failure> {
        let path = out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Failure::stage("manifest", e))?;
        fs::write(&path, text + "\n")
            .map_err(|e| Failure::stage("manifest", format!("{}: {e}", path.display())))
    }
}
