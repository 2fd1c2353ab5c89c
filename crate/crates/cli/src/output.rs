//! Outputs are written to a hidden sibling path and renamed into place only
//! after the command succeeds, so a failed run leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::{DataError, Usage};

pub const RUN_RECORD: &str = "run.json";

pub struct Staged {
    target: PathBuf,
    tmp: PathBuf,
    is_dir: bool,
    committed: bool,
}

impl Staged {
    fn new(target: &Path, is_dir: bool) -> Result<Self> {
        let name = target
            .file_name()
            .ok_or_else(|| Usage(format!("output path {} has no file name", target.display())))?;
        if target.exists() && target.is_dir() != is_dir {
            let want = if is_dir { "a directory" } else { "a file" };
            return Err(Usage(format!("output {} exists and is not {want}", target.display())).into());
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let tmp = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
        Ok(Self {
            target: target.to_path_buf(),
            tmp,
            is_dir,
            committed: false,
        })
    }

    pub fn file(target: &Path) -> Result<Self> {
        Self::new(target, false)
    }

    pub fn dir(target: &Path) -> Result<Self> {
        Self::new(target, true)
    }

    /// Where the command should write. Parent directories are created here,
    /// after all inputs have been validated.
    pub fn path(&self) -> Result<&Path> {
        if let Some(parent) = self.tmp.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(&self.tmp)
    }

    /// Path of the run record: inside a directory output, next to a file output.
    fn record_paths(&self) -> (PathBuf, PathBuf) {
        if self.is_dir {
            (self.tmp.join(RUN_RECORD), self.target.join(RUN_RECORD))
        } else {
            let mut staged = self.tmp.clone().into_os_string();
            staged.push(".run.json");
            let mut fin = self.target.clone().into_os_string();
            fin.push(".run.json");
            (staged.into(), fin.into())
        }
    }

    pub fn commit(mut self, record: &impl Serialize) -> Result<PathBuf> {
        let (staged_record, final_record) = self.record_paths();
        let text = serde_json::to_string_pretty(record)?;
        fs::write(&staged_record, text).with_context(|| format!("writing {}", staged_record.display()))?;
        if self.is_dir && self.target.exists() {
            fs::remove_dir_all(&self.target).with_context(|| format!("replacing {}", self.target.display()))?;
        }
        fs::rename(&self.tmp, &self.target).with_context(|| format!("writing {}", self.target.display()))?;
        if !self.is_dir {
            fs::rename(&staged_record, &final_record)
                .with_context(|| format!("writing {}", final_record.display()))?;
        }
        self.committed = true;
        Ok(final_record)
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        if self.is_dir {
            let _ = fs::remove_dir_all(&self.tmp);
        } else {
            let _ = fs::remove_file(&self.tmp);
            let _ = fs::remove_file(self.record_paths().0);
        }
    }
}

/// Fails with a data error unless `path` exists.
pub fn require_input(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        return Err(DataError(format!("{what} {} does not exist", path.display())).into());
    }
    Ok(())
}
