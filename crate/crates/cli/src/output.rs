//! Output files that are removed again unless the command succeeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Tracks files a command creates. Dropping the guard without calling
/// [`Outputs::commit`] deletes them.
#[derive(Debug, Default)]
pub struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register `path` before anything is written to it.
    pub fn track(&mut self, path: &Path) -> PathBuf {
        self.paths.push(path.to_path_buf());
        path.to_path_buf()
    }

    /// Create `path` for buffered writing and register it.
    pub fn create(&mut self, path: &Path) -> Result<BufWriter<File>> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.track(path);
        Ok(BufWriter::new(file))
    }

    /// Write a whole file at once.
    pub fn write(&mut self, path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = self.create(path)?;
        f(&mut w)?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.paths {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}
