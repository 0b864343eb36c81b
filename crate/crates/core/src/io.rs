//! Atomic file output and run metadata.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::rng::RNG_ALGORITHM;

/// Writes through `fill` into a temporary file next to `path`, then renames
/// it over `path`. Readers never observe a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Sidecar path holding the metadata of an output file: `<path>.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Everything needed to reproduce an output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<C: Serialize> {
    pub command: String,
    pub version: &'static str,
    pub rng: &'static str,
    pub seed: Option<u64>,
    pub config: C,
    /// Nonfatal remarks produced during the run.
    pub notes: Vec<String>,
}

impl<C: Serialize> RunMetadata<C> {
    pub fn new(command: impl Into<String>, seed: Option<u64>, config: C) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            rng: RNG_ALGORITHM,
            seed,
            config,
            notes: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, self)?;
            writeln!(w)?;
            Ok(())
        })
    }
}
