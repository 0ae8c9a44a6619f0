//! Plain-directory persistence.
//!
//! ```text
//! <root>/workspace.json                   schema version, active model
//! <root>/libraries/<id>/library.json
//! <root>/libraries/<id>/paper-<id>.json
//! <root>/retrievals/<id>.json
//! <root>/labels.jsonl
//! <root>/cache/embeddings.bin
//! <root>/models/<id>.json
//! <root>/.lock                            single-writer lock (holds the pid)
//! ```
//!
//! Every mutation is applied to a copy of the current state, the changed
//! files are committed in one journaled transaction, and only then is the
//! copy published. Snapshots are cheap `Arc` clones of the published state.

mod txn;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassificationReport, LabelRecord, LabelStore, LinearLabelModel};
use crate::corpus::{Corpus, Library, LibraryId, ModelId, Paper, RetrievalId};
use crate::embedding::{EmbeddingCache, Provenance};
use crate::error::{Error, Result};
use crate::retrieval::RetrievalSpec;

use txn::{FailPoint, Txn};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub model: LinearLabelModel<f64>,
    pub report: Option<ClassificationReport>,
    pub created_at: DateTime<Utc>,
    pub train_records: usize,
    pub test_records: usize,
}

/// Everything the workspace persists, as one immutable value.
#[derive(Debug, Clone, Default)]
pub struct State {
    pub corpus: Corpus,
    pub retrievals: BTreeMap<RetrievalId, RetrievalSpec<f64>>,
    pub labels: LabelStore,
    pub models: BTreeMap<ModelId, StoredModel>,
    pub active_model: Option<ModelId>,
}

pub type Snapshot = Arc<State>;

impl State {
    pub fn retrieval(&self, id: &RetrievalId) -> Result<&RetrievalSpec<f64>> {
        self.retrievals
            .get(id)
            .ok_or_else(|| Error::not_found("retrieval", id.as_str()))
    }

    pub fn model(&self, id: Option<&ModelId>) -> Result<&StoredModel> {
        let id = id
            .or(self.active_model.as_ref())
            .ok_or_else(|| Error::not_found("model", "<active>"))?;
        self.models
            .get(id)
            .ok_or_else(|| Error::not_found("model", id.as_str()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WorkspaceMeta {
    schema_version: u32,
    #[serde(default)]
    active_model: Option<ModelId>,
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize, Deserialize)]
struct PaperFile {
    paper: Paper,
}

#[derive(Debug)]
struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(".lock");
        for _ in 0..2 {
            match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    use std::io::Write;
                    let _ = write!(f, "{}", std::process::id());
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if lock_is_stale(&path) {
                        log::warn!("removing stale lock {}", path.display());
                        let _ = fs::remove_file(&path);
                        continue;
                    }
                    return Err(Error::Locked(path));
                }
                Err(e) => return Err(Error::io(&path, e)),
            }
        }
        Err(Error::Locked(path))
    }
}

#[cfg(target_os = "linux")]
fn lock_is_stale(path: &Path) -> bool {
    match fs::read_to_string(path).ok().and_then(|s| s.trim().parse::<u32>().ok()) {
        Some(pid) => !Path::new(&format!("/proc/{pid}")).exists(),
        None => false,
    }
}

#[cfg(not(target_os = "linux"))]
fn lock_is_stale(_path: &Path) -> bool {
    false
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct Workspace {
    root: PathBuf,
    lock: Option<LockGuard>,
    state: RwLock<Snapshot>,
    writer: Mutex<()>,
    cache: Mutex<Option<Arc<EmbeddingCache>>>,
}

impl std::fmt::Debug for Workspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workspace")
            .field("root", &self.root)
            .field("writable", &self.lock.is_some())
            .finish()
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Corrupted {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let v: Versioned<T> = read_json(path)?;
    check_version(v.schema_version)?;
    Ok(v.body)
}

fn check_version(found: u32) -> Result<()> {
    if found > SCHEMA_VERSION {
        return Err(Error::UnsupportedVersion {
            found,
            supported: SCHEMA_VERSION,
        });
    }
    Ok(())
}

fn versioned_bytes<T: Serialize>(body: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })
    .expect("workspace types serialize");
    bytes.push(b'\n');
    bytes
}

fn sorted_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    match fs::read_dir(dir) {
        Ok(entries) => {
            let mut out = Vec::new();
            for e in entries {
                out.push(e.map_err(|e| Error::io(dir, e))?.path());
            }
            out.sort();
            Ok(out)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(Error::io(dir, e)),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

impl Workspace {
    /// Opens (or initializes) a workspace for writing, taking the lock.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let lock = LockGuard::acquire(&root)?;
        txn::recover(&root)?;
        let meta_path = root.join("workspace.json");
        if !meta_path.exists() {
            let meta = WorkspaceMeta {
                schema_version: SCHEMA_VERSION,
                active_model: None,
            };
            txn::write_atomic(&meta_path, &serde_json::to_vec_pretty(&meta).expect("meta"))?;
        }
        let state = Self::load(&root)?;
        Ok(Self {
            root,
            lock: Some(lock),
            state: RwLock::new(Arc::new(state)),
            writer: Mutex::new(()),
            cache: Mutex::new(None),
        })
    }

    /// Opens without the writer lock. Mutations fail.
    pub fn open_read_only(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !root.join("workspace.json").exists() {
            return Err(Error::not_found("workspace", root.display().to_string()));
        }
        let state = Self::load(&root)?;
        Ok(Self {
            root,
            lock: None,
            state: RwLock::new(Arc::new(state)),
            writer: Mutex::new(()),
            cache: Mutex::new(None),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn load(root: &Path) -> Result<State> {
        let meta: WorkspaceMeta = read_json(&root.join("workspace.json"))?;
        check_version(meta.schema_version)?;

        let mut libraries = Vec::new();
        let mut papers = Vec::new();
        for dir in sorted_dir(&root.join("libraries"))? {
            if !dir.is_dir() {
                continue;
            }
            let library: Library = read_versioned(&dir.join("library.json"))?;
            for file in sorted_dir(&dir)? {
                let name = file.file_name().map(|n| n.to_string_lossy().into_owned());
                if is_json(&file) && name.is_some_and(|n| n.starts_with("paper-")) {
                    let pf: PaperFile = read_versioned(&file)?;
                    papers.push(pf.paper);
                }
            }
            libraries.push(library);
        }
        let corpus = Corpus::from_parts(libraries, papers);
        for library in corpus.libraries() {
            for pid in &library.paper_ids {
                corpus.paper(pid).map_err(|_| Error::Corrupted {
                    path: root.join("libraries").join(library.id.as_str()),
                    message: format!("library lists missing paper {pid}"),
                })?;
            }
        }

        let mut retrievals = BTreeMap::new();
        for file in sorted_dir(&root.join("retrievals"))? {
            if is_json(&file) {
                let spec: RetrievalSpec<f64> = read_versioned(&file)?;
                retrievals.insert(spec.id.clone(), spec);
            }
        }

        let labels_path = root.join("labels.jsonl");
        let mut records = Vec::new();
        if labels_path.exists() {
            let text = fs::read_to_string(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let r: LabelRecord = serde_json::from_str(line).map_err(|e| Error::Corrupted {
                    path: labels_path.clone(),
                    message: format!("line {}: {e}", i + 1),
                })?;
                records.push(r);
            }
        }

        let mut models = BTreeMap::new();
        for file in sorted_dir(&root.join("models"))? {
            if is_json(&file) {
                let m: StoredModel = read_versioned(&file)?;
                models.insert(m.model.id.clone(), m);
            }
        }

        Ok(State {
            corpus,
            retrievals,
            labels: LabelStore::from_records(records),
            models,
            active_model: meta.active_model,
        })
    }

    /// Consistent point-in-time view; later mutations do not affect it.
    pub fn snapshot(&self) -> Snapshot {
        self.state.read().expect("state lock").clone()
    }

    /// Applies `f` to a copy of the state, persists the difference
    /// atomically, then publishes the copy. On error nothing changes.
    pub fn mutate<R>(&self, f: impl FnOnce(&mut State) -> Result<R>) -> Result<R> {
        self.mutate_with(FailPoint::Never, f)
    }

    fn mutate_with<R>(&self, fail: FailPoint, f: impl FnOnce(&mut State) -> Result<R>) -> Result<R> {
        if self.lock.is_none() {
            return Err(Error::Locked(self.root.join(".lock")));
        }
        let _writer = self.writer.lock().expect("writer lock");
        let old = self.snapshot();
        let mut new = (*old).clone();
        let out = f(&mut new)?;
        self.diff(&old, &new).commit(&self.root, fail)?;
        *self.state.write().expect("state lock") = Arc::new(new);
        Ok(out)
    }

    fn library_dir(&self, id: &LibraryId) -> PathBuf {
        self.root.join("libraries").join(id.as_str())
    }

    fn diff(&self, old: &State, new: &State) -> Txn {
        let mut txn = Txn::default();

        for lib in new.corpus.libraries() {
            if old.corpus.library(&lib.id).ok() != Some(lib) {
                txn.write(self.library_dir(&lib.id).join("library.json"), versioned_bytes(lib));
            }
        }
        for paper in new.corpus.papers() {
            if old.corpus.paper(&paper.id).ok() != Some(paper) {
                let body = PaperFile {
                    paper: paper.clone(),
                };
                txn.write(
                    self.library_dir(&paper.library_id)
                        .join(format!("paper-{}.json", paper.id)),
                    versioned_bytes(&body),
                );
            }
        }
        for paper in old.corpus.papers() {
            if new.corpus.paper(&paper.id).is_err() {
                txn.delete(
                    self.library_dir(&paper.library_id)
                        .join(format!("paper-{}.json", paper.id)),
                );
            }
        }
        for lib in old.corpus.libraries() {
            if new.corpus.library(&lib.id).is_err() {
                txn.delete(self.library_dir(&lib.id).join("library.json"));
            }
        }

        for (id, spec) in &new.retrievals {
            if old.retrievals.get(id) != Some(spec) {
                txn.write(
                    self.root.join("retrievals").join(format!("{id}.json")),
                    versioned_bytes(spec),
                );
            }
        }
        for id in old.retrievals.keys() {
            if !new.retrievals.contains_key(id) {
                txn.delete(self.root.join("retrievals").join(format!("{id}.json")));
            }
        }

        if old.labels != new.labels {
            let mut bytes = Vec::new();
            for r in new.labels.records() {
                bytes.extend(serde_json::to_vec(r).expect("label records serialize"));
                bytes.push(b'\n');
            }
            txn.write(self.root.join("labels.jsonl"), bytes);
        }

        for (id, m) in &new.models {
            if old.models.get(id) != Some(m) {
                txn.write(
                    self.root.join("models").join(format!("{id}.json")),
                    versioned_bytes(m),
                );
            }
        }
        for id in old.models.keys() {
            if !new.models.contains_key(id) {
                txn.delete(self.root.join("models").join(format!("{id}.json")));
            }
        }

        if old.active_model != new.active_model {
            let meta = WorkspaceMeta {
                schema_version: SCHEMA_VERSION,
                active_model: new.active_model.clone(),
            };
            txn.write(
                self.root.join("workspace.json"),
                serde_json::to_vec_pretty(&meta).expect("meta serializes"),
            );
        }
        txn
    }

    fn cache_path(&self) -> PathBuf {
        self.root.join("cache").join("embeddings.bin")
    }

    /// The embedding cache for `provenance`, loaded from disk on first use.
    /// A cache file written by another provider is replaced.
    pub fn embedding_cache(&self, provenance: &Provenance) -> Result<Arc<EmbeddingCache>> {
        let mut slot = self.cache.lock().expect("cache slot");
        if let Some(c) = slot.as_ref().filter(|c| c.provenance() == provenance) {
            return Ok(c.clone());
        }
        let path = self.cache_path();
        let cache = if path.exists() {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            match EmbeddingCache::from_bytes(&bytes) {
                Ok(c) if c.provenance() == provenance => c,
                Ok(c) => {
                    log::warn!(
                        "embedding cache holds {}, starting fresh for {provenance}",
                        c.provenance()
                    );
                    EmbeddingCache::new(provenance.clone())
                }
                Err(Error::Corrupted { message, .. }) => {
                    return Err(Error::Corrupted { path, message });
                }
                Err(e) => return Err(e),
            }
        } else {
            EmbeddingCache::new(provenance.clone())
        };
        let cache = Arc::new(cache);
        *slot = Some(cache.clone());
        Ok(cache)
    }

    /// Writes the cache file if new entries were added.
    pub fn save_cache(&self) -> Result<()> {
        if self.lock.is_none() {
            return Ok(());
        }
        let slot = self.cache.lock().expect("cache slot");
        if let Some(cache) = slot.as_ref().filter(|c| c.is_dirty()) {
            let path = self.cache_path();
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            txn::write_atomic(&path, &cache.to_bytes())?;
            cache.mark_clean();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Category;
    use crate::corpus::IngestOptions;

    fn fixture_tei() -> &'static [u8] {
        include_bytes!("../../fixtures/tei/two_sections.tei.xml")
    }

    fn state_fingerprint(s: &State) -> String {
        let mut out = String::new();
        for l in s.corpus.libraries() {
            out += &serde_json::to_string(l).unwrap();
        }
        for p in s.corpus.papers() {
            out += &serde_json::to_string(p).unwrap();
        }
        for r in s.retrievals.values() {
            out += &serde_json::to_string(r).unwrap();
        }
        for r in s.labels.records() {
            out += &serde_json::to_string(r).unwrap();
        }
        out += &format!("{:?}", s.active_model);
        out
    }

    #[test]
    fn fresh_directory_is_empty_workspace() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path().join("ws")).unwrap();
        let snap = ws.snapshot();
        assert_eq!(snap.corpus.libraries().count(), 0);
        assert!(snap.retrievals.is_empty());
    }

    #[test]
    fn reopen_yields_identical_state() {
        let dir = tempfile::tempdir().unwrap();
        let before = {
            let ws = Workspace::open(dir.path()).unwrap();
            ws.mutate(|s| {
                let lib = s.corpus.create_library("lib")?.id.clone();
                let out = s
                    .corpus
                    .ingest_tei(&lib, fixture_tei(), None, IngestOptions::default())?;
                let pid = s.corpus.get_paragraphs(&out.paper_id)?[0].id.clone();
                s.labels
                    .set(LabelRecord::new(pid, [Category::Sensing], false)?);
                let spec = RetrievalSpec::new("r")?;
                s.retrievals.insert(spec.id.clone(), spec);
                Ok(())
            })
            .unwrap();
            state_fingerprint(&ws.snapshot())
        };
        let ws = Workspace::open(dir.path()).unwrap();
        assert_eq!(state_fingerprint(&ws.snapshot()), before);
    }

    #[test]
    fn second_writer_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let _ws = Workspace::open(dir.path()).unwrap();
        assert!(matches!(Workspace::open(dir.path()), Err(Error::Locked(_))));
        let ro = Workspace::open_read_only(dir.path()).unwrap();
        assert!(ro.mutate(|_| Ok(())).is_err());
    }

    #[test]
    fn newer_schema_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("workspace.json"),
            r#"{"schema_version": 99, "active_model": null}"#,
        )
        .unwrap();
        assert!(matches!(
            Workspace::open(dir.path()),
            Err(Error::UnsupportedVersion { found: 99, .. })
        ));
    }

    #[test]
    fn corrupted_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        {
            let ws = Workspace::open(dir.path()).unwrap();
            ws.mutate(|s| {
                let spec: RetrievalSpec = RetrievalSpec::new("r")?;
                s.retrievals.insert(spec.id.clone(), spec);
                Ok(())
            })
            .unwrap();
        }
        let file = sorted_dir(&dir.path().join("retrievals")).unwrap().remove(0);
        fs::write(&file, "{ not json").unwrap();
        match Workspace::open(dir.path()) {
            Err(Error::Corrupted { path, .. }) => assert_eq!(path, file),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn snapshot_isolated_from_later_mutation() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let a = ws.snapshot();
        let b = ws.snapshot();
        assert_eq!(state_fingerprint(&a), state_fingerprint(&b));
        ws.mutate(|s| s.corpus.create_library("x").map(|_| ())).unwrap();
        assert_eq!(a.corpus.libraries().count(), 0);
        assert_eq!(ws.snapshot().corpus.libraries().count(), 1);
    }

    #[test]
    fn failed_mutation_changes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let r: Result<()> = ws.mutate(|s| {
            s.corpus.create_library("x")?;
            Err(Error::EmptyText)
        });
        assert!(r.is_err());
        assert_eq!(ws.snapshot().corpus.libraries().count(), 0);
    }

    /// Interrupt a multi-file commit at every step; reopening must show the
    /// old state or the new one.
    #[test]
    fn interrupted_commit_is_never_torn() {
        let setup = |dir: &Path| -> (String, String) {
            let ws = Workspace::open(dir).unwrap();
            let paper = ws
                .mutate(|s| {
                    let lib = s.corpus.create_library("lib")?.id.clone();
                    let out = s
                        .corpus
                        .ingest_tei(&lib, fixture_tei(), None, IngestOptions::default())?;
                    Ok(out.paper_id)
                })
                .unwrap();
            let old = state_fingerprint(&ws.snapshot());
            let pid = ws.snapshot().corpus.get_paragraphs(&paper).unwrap()[0].id.clone();
            // compute the expected new state without committing it
            let mut expected = (*ws.snapshot()).clone();
            apply_change(&mut expected, &pid);
            (old, state_fingerprint(&expected))
        };
        fn apply_change(s: &mut State, pid: &crate::corpus::ParagraphId) {
            let mut spec: RetrievalSpec = RetrievalSpec::new("r").unwrap();
            spec.id = RetrievalId::from("fixed");
            spec.label(pid, crate::retrieval::Polarity::Positive);
            s.retrievals.insert(spec.id.clone(), spec);
            s.labels
                .set(LabelRecord::new(pid.clone(), [Category::Data], false).unwrap());
            let fix = s.corpus.correct_paragraph(pid, "corrected text").unwrap();
            s.labels.migrate(&fix.old_id, &fix.paragraph.id);
            for r in s.retrievals.values_mut() {
                r.migrate_paragraph(&fix.old_id, &fix.paragraph.id);
            }
        }

        let mut saw_old = false;
        let mut saw_new = false;
        for step in 0..12 {
            let dir = tempfile::tempdir().unwrap();
            let (old, new) = setup(dir.path());
            {
                let ws = Workspace::open(dir.path()).unwrap();
                let snap = ws.snapshot();
                let pid = snap.corpus.papers().next().unwrap().paragraphs().next().unwrap().id.clone();
                let _ = ws.mutate_with(FailPoint::After(step), |s| {
                    apply_change(s, &pid);
                    Ok(())
                });
            }
            let reopened = state_fingerprint(&Workspace::open(dir.path()).unwrap().snapshot());
            assert!(reopened == old || reopened == new, "torn state at step {step}");
            saw_old |= reopened == old;
            saw_new |= reopened == new;
        }
        assert!(saw_old && saw_new);
    }
}
