//! Multi-file atomic commits.
//!
//! 1. every new file is written next to its target as `<name>.tmp-<txn>`
//! 2. a journal listing the renames and deletions is renamed into place
//!    (the commit point)
//! 3. temps are renamed over their targets, deletions applied
//! 4. the journal is removed
//!
//! Recovery replays a present journal and discards stray temps. A reader
//! therefore sees either every change of a transaction or none of them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const JOURNAL: &str = ".txn.json";

#[derive(Debug, Serialize, Deserialize)]
struct Journal {
    renames: Vec<(PathBuf, PathBuf)>,
    deletes: Vec<PathBuf>,
}

#[derive(Debug, Default)]
pub(crate) struct Txn {
    writes: Vec<(PathBuf, Vec<u8>)>,
    deletes: Vec<PathBuf>,
}

/// Test hook: stop after this many filesystem steps.
#[derive(Debug, Clone, Copy)]
pub(crate) enum FailPoint {
    Never,
    #[cfg_attr(not(test), allow(dead_code))]
    After(usize),
}

struct Steps {
    done: usize,
    fail: FailPoint,
}

impl Steps {
    fn tick(&mut self) -> Result<()> {
        if let FailPoint::After(n) = self.fail {
            if self.done >= n {
                return Err(Error::io(
                    "<simulated interruption>",
                    std::io::Error::other("simulated interruption"),
                ));
            }
        }
        self.done += 1;
        Ok(())
    }
}

pub(crate) fn write_synced(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

/// Write-temp-then-rename for a single file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-single");
    write_synced(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl Txn {
    pub fn write(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.writes.push((path, bytes));
    }

    pub fn delete(&mut self, path: PathBuf) {
        self.deletes.push(path);
    }

    pub fn is_empty(&self) -> bool {
        self.writes.is_empty() && self.deletes.is_empty()
    }

    pub fn commit(self, root: &Path, fail: FailPoint) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        let mut steps = Steps { done: 0, fail };
        let tag = &crate::corpus::random_hex_id()[..12];
        let mut renames = Vec::with_capacity(self.writes.len());
        for (target, bytes) in &self.writes {
            steps.tick()?;
            let name = target
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let tmp = target.with_file_name(format!("{name}.tmp-{tag}"));
            write_synced(&tmp, bytes)?;
            renames.push((tmp, target.clone()));
        }

        steps.tick()?;
        let journal = Journal {
            renames,
            deletes: self.deletes,
        };
        let bytes = serde_json::to_vec(&journal).expect("journal serializes");
        write_atomic(&root.join(JOURNAL), &bytes)?;

        apply(root, &journal, &mut steps)
    }
}

fn apply(root: &Path, journal: &Journal, steps: &mut Steps) -> Result<()> {
    for (tmp, target) in &journal.renames {
        steps.tick()?;
        if tmp.exists() {
            fs::rename(tmp, target).map_err(|e| Error::io(target, e))?;
        }
    }
    for path in &journal.deletes {
        steps.tick()?;
        match fs::remove_file(path) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(path, e)),
        }
        if let Some(parent) = path.parent() {
            // library directories disappear with their last file
            let _ = fs::remove_dir(parent);
        }
    }
    steps.tick()?;
    let journal_path = root.join(JOURNAL);
    fs::remove_file(&journal_path).map_err(|e| Error::io(journal_path, e))
}

/// Finishes a committed transaction or discards an uncommitted one.
pub(crate) fn recover(root: &Path) -> Result<()> {
    let journal_path = root.join(JOURNAL);
    if journal_path.exists() {
        let bytes = fs::read(&journal_path).map_err(|e| Error::io(&journal_path, e))?;
        let journal: Journal = serde_json::from_slice(&bytes).map_err(|e| Error::Corrupted {
            path: journal_path.clone(),
            message: e.to_string(),
        })?;
        let mut steps = Steps {
            done: 0,
            fail: FailPoint::Never,
        };
        apply(root, &journal, &mut steps)?;
        log::info!("replayed interrupted transaction in {}", root.display());
    }
    remove_stray_temps(root)
}

fn remove_stray_temps(dir: &Path) -> Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            remove_stray_temps(&path)?;
        } else if path
            .file_name()
            .is_some_and(|n| n.to_string_lossy().contains(".tmp-"))
        {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}
