//! Embedding cache keyed by the SHA-256 of whitespace-normalized text.
//!
//! On-disk layout, little-endian:
//!
//! ```text
//! magic        4 bytes  "SXEC"
//! version      u16      1
//! provider_id  u16 length + UTF-8 bytes
//! model_id     u16 length + UTF-8 bytes
//! dim          u32
//! count        u64
//! records      count x (32-byte key, dim x f32)
//! ```
//!
//! Records are written in key order so identical caches produce identical
//! files.

use std::collections::BTreeMap;
use std::sync::RwLock;

use super::Provenance;
use crate::error::{Error, Result};
use crate::text::{normalize_whitespace, sha256};

const MAGIC: &[u8; 4] = b"SXEC";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey(pub [u8; 32]);

impl CacheKey {
    pub fn for_text(text: &str) -> Self {
        CacheKey(sha256(normalize_whitespace(text).as_bytes()))
    }
}

/// Readers proceed concurrently; writes are serialized by the lock.
#[derive(Debug)]
pub struct EmbeddingCache {
    provenance: Provenance,
    entries: RwLock<BTreeMap<CacheKey, Vec<f32>>>,
    dirty: std::sync::atomic::AtomicBool,
}

impl Clone for EmbeddingCache {
    fn clone(&self) -> Self {
        Self {
            provenance: self.provenance.clone(),
            entries: RwLock::new(self.entries.read().expect("cache lock").clone()),
            dirty: std::sync::atomic::AtomicBool::new(self.is_dirty()),
        }
    }
}

impl EmbeddingCache {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            entries: RwLock::new(BTreeMap::new()),
            dirty: std::sync::atomic::AtomicBool::new(false),
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.entries.read().expect("cache lock").contains_key(key)
    }

    pub fn get(&self, key: &CacheKey) -> Option<Vec<f32>> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    /// Last write wins.
    pub fn insert(&self, key: CacheKey, values: Vec<f32>) {
        assert_eq!(values.len(), self.provenance.dim, "cache entry dimension");
        self.entries.write().expect("cache lock").insert(key, values);
        self.dirty.store(true, std::sync::atomic::Ordering::SeqCst);
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty.load(std::sync::atomic::Ordering::SeqCst)
    }

    pub fn mark_clean(&self) {
        self.dirty.store(false, std::sync::atomic::Ordering::SeqCst);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let entries = self.entries.read().expect("cache lock");
        let p = &self.provenance;
        let mut out = Vec::with_capacity(64 + entries.len() * (32 + 4 * p.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for s in [&p.provider_id, &p.model_id] {
            out.extend_from_slice(&(s.len() as u16).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.extend_from_slice(&(p.dim as u32).to_le_bytes());
        out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
        for (key, values) in entries.iter() {
            out.extend_from_slice(&key.0);
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.corrupt("bad magic"));
        }
        let version = r.u16()?;
        if version > VERSION {
            return Err(Error::UnsupportedVersion {
                found: u32::from(version),
                supported: u32::from(VERSION),
            });
        }
        let provider_id = r.string()?;
        let model_id = r.string()?;
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(r.corrupt("zero dimension"));
        }
        let count = r.u64()? as usize;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let mut key = [0u8; 32];
            key.copy_from_slice(r.take(32)?);
            let raw = r.take(dim * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            entries.insert(CacheKey(key), values);
        }
        if r.pos != bytes.len() {
            return Err(r.corrupt("trailing bytes"));
        }
        Ok(Self {
            provenance: Provenance {
                provider_id,
                model_id,
                dim,
            },
            entries: RwLock::new(entries),
            dirty: std::sync::atomic::AtomicBool::new(false),
        })
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn corrupt(&self, message: &str) -> Error {
        Error::Corrupted {
            path: "embedding cache".into(),
            message: format!("{message} at byte {}", self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.corrupt("truncated")),
        }
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| self.corrupt("invalid UTF-8"))
    }
}
