//! File writing with the optional timestamp line.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{io, CliError};

#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    stamp: Option<String>,
}

impl Output {
    pub fn new(dir: PathBuf, reproducible: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Output { dir, stamp: timestamp(reproducible) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `body`, preceded by the timestamp comment unless reproducible.
    pub fn text(&self, name: &str, body: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_stamped(&path, self.stamp.as_deref(), body)?;
        Ok(path)
    }

    /// Writes `body` unchanged (binary matrices, SVG).
    pub fn raw(&self, name: &str, body: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        Ok(path)
    }
}

/// `# generated_unix=<seconds>`, or nothing under `--reproducible`.
pub fn timestamp(reproducible: bool) -> Option<String> {
    if reproducible {
        return None;
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Some(format!("# generated_unix={secs}\n"))
}

pub fn write_stamped(path: &Path, stamp: Option<&str>, body: &[u8]) -> Result<(), CliError> {
    let mut data = Vec::with_capacity(body.len() + 32);
    if let Some(s) = stamp {
        data.extend_from_slice(s.as_bytes());
    }
    data.extend_from_slice(body);
    std::fs::write(path, data).map_err(|e| io(path, e))
}
