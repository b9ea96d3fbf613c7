//! Embedding cache keyed by model id and normalized-text hash.
//!
//! On disk each model gets three files in the cache directory:
//!
//! * `<model>.bin`: concatenated records, each `dim` little-endian `f64`s
//!   followed by an 8-byte checksum of those bytes;
//! * `<model>.idx`: one `hash offset dim` line per record;
//! * `<model>.manifest.json`: model id, dimension and entry count.
//!
//! Index lines that point past the end of the data file, disagree on
//! dimension, or fail their checksum are dropped with a warning.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EmbedError;
use crate::text::{content_hash, key_form};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub model_id: String,
    pub dim: usize,
    pub entries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub model_id: String,
    pub dim: usize,
    pub entries: usize,
    /// Corrupt index entries dropped when the cache was opened.
    pub dropped: usize,
    pub hits: usize,
    pub misses: usize,
    pub data_bytes: u64,
}

struct DiskFiles {
    bin_path: PathBuf,
    idx_path: PathBuf,
    manifest_path: PathBuf,
    bin: File,
    idx: File,
    bin_len: u64,
}

pub struct EmbeddingCache {
    model_id: String,
    dim: usize,
    entries: RwLock<HashMap<String, Vec<f64>>>,
    disk: Mutex<Option<DiskFiles>>,
    dropped: usize,
    counters: Mutex<(usize, usize)>,
}

/// File-name-safe form of a model id.
pub fn model_slug(model_id: &str) -> String {
    model_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn checksum(bytes: &[u8]) -> [u8; 8] {
    let d = Sha256::digest(bytes);
    d[..8].try_into().expect("8 bytes")
}

fn io_err(path: &Path, e: std::io::Error) -> EmbedError {
    EmbedError::Io(format!("{}: {e}", path.display()))
}

impl EmbeddingCache {
    /// Cache key for `text` under `model_id`.
    pub fn key(model_id: &str, text: &str) -> String {
        content_hash(&[model_id, &key_form(text)])
    }

    pub fn in_memory(model_id: impl Into<String>, dim: usize) -> Self {
        Self {
            model_id: model_id.into(),
            dim,
            entries: RwLock::new(HashMap::new()),
            disk: Mutex::new(None),
            dropped: 0,
            counters: Mutex::new((0, 0)),
        }
    }

    /// Opens, or creates, the on-disk cache for one model in `dir`.
    pub fn open(dir: &Path, model_id: &str, dim: usize) -> Result<Self, EmbedError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let slug = model_slug(model_id);
        let bin_path = dir.join(format!("{slug}.bin"));
        let idx_path = dir.join(format!("{slug}.idx"));
        let manifest_path = dir.join(format!("{slug}.manifest.json"));

        if let Ok(text) = fs::read_to_string(&manifest_path) {
            let manifest: CacheManifest =
                serde_json::from_str(&text).map_err(|e| EmbedError::Io(format!("{}: {e}", manifest_path.display())))?;
            if manifest.model_id != model_id || manifest.dim != dim {
                return Err(EmbedError::CacheModelMismatch {
                    expected: format!("{model_id} (dim {dim})"),
                    found: format!("{} (dim {})", manifest.model_id, manifest.dim),
                });
            }
        }

        let mut entries = HashMap::new();
        let mut dropped = 0;
        let mut data = Vec::new();
        if let Ok(mut f) = File::open(&bin_path) {
            f.read_to_end(&mut data).map_err(|e| io_err(&bin_path, e))?;
        }
        if let Ok(f) = File::open(&idx_path) {
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| io_err(&idx_path, e))?;
                match decode_entry(&line, &data, dim) {
                    Some((hash, v)) => {
                        entries.insert(hash, v);
                    }
                    None if line.trim().is_empty() => {}
                    None => dropped += 1,
                }
            }
        }
        if dropped > 0 {
            log::warn!("embedding cache {}: dropped {dropped} corrupt entries", idx_path.display());
        }

        let open_append = |p: &Path| OpenOptions::new().create(true).append(true).open(p).map_err(|e| io_err(p, e));
        let bin = open_append(&bin_path)?;
        let idx = open_append(&idx_path)?;
        let cache = Self {
            model_id: model_id.to_owned(),
            dim,
            entries: RwLock::new(entries),
            disk: Mutex::new(Some(DiskFiles {
                bin_path,
                idx_path,
                manifest_path,
                bin,
                idx,
                bin_len: data.len() as u64,
            })),
            dropped,
            counters: Mutex::new((0, 0)),
        };
        cache.write_manifest()?;
        Ok(cache)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<Vec<f64>> {
        let hit = self.entries.read().unwrap().get(key).cloned();
        let mut c = self.counters.lock().unwrap();
        if hit.is_some() {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
        hit
    }

    /// Stores vectors under their keys, appending to disk when file-backed.
    pub fn put_many(&self, items: Vec<(String, Vec<f64>)>) -> Result<(), EmbedError> {
        let mut disk = self.disk.lock().unwrap();
        let mut entries = self.entries.write().unwrap();
        for (key, v) in items {
            if v.len() != self.dim {
                return Err(EmbedError::CacheModelMismatch {
                    expected: format!("{} (dim {})", self.model_id, self.dim),
                    found: format!("vector of dim {}", v.len()),
                });
            }
            if entries.contains_key(&key) {
                continue;
            }
            if let Some(files) = disk.as_mut() {
                let mut bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
                let sum = checksum(&bytes);
                bytes.extend_from_slice(&sum);
                files.bin.write_all(&bytes).map_err(|e| io_err(&files.bin_path, e))?;
                writeln!(files.idx, "{key} {} {}", files.bin_len, self.dim).map_err(|e| io_err(&files.idx_path, e))?;
                files.bin_len += bytes.len() as u64;
            }
            entries.insert(key, v);
        }
        drop(entries);
        drop(disk);
        self.write_manifest()
    }

    fn write_manifest(&self) -> Result<(), EmbedError> {
        let disk = self.disk.lock().unwrap();
        let Some(files) = disk.as_ref() else { return Ok(()) };
        let manifest = CacheManifest {
            model_id: self.model_id.clone(),
            dim: self.dim,
            entries: self.entries.read().unwrap().len(),
        };
        let tmp = files.manifest_path.with_extension("json.tmp");
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&tmp, body + "\n").map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &files.manifest_path).map_err(|e| io_err(&files.manifest_path, e))
    }

    pub fn stats(&self) -> CacheStats {
        let (hits, misses) = *self.counters.lock().unwrap();
        let data_bytes = self.disk.lock().unwrap().as_ref().map_or(0, |f| f.bin_len);
        CacheStats {
            model_id: self.model_id.clone(),
            dim: self.dim,
            entries: self.len(),
            dropped: self.dropped,
            hits,
            misses,
            data_bytes,
        }
    }

    /// Removes every entry, and the backing files when file-backed.
    pub fn purge(&self) -> Result<(), EmbedError> {
        let mut disk = self.disk.lock().unwrap();
        self.entries.write().unwrap().clear();
        if let Some(files) = disk.as_mut() {
            for p in [&files.bin_path, &files.idx_path, &files.manifest_path] {
                match fs::remove_file(p) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(io_err(p, e)),
                }
            }
            files.bin = File::options()
                .create(true)
                .append(true)
                .open(&files.bin_path)
                .map_err(|e| io_err(&files.bin_path, e))?;
            files.idx = File::options()
                .create(true)
                .append(true)
                .open(&files.idx_path)
                .map_err(|e| io_err(&files.idx_path, e))?;
            files.bin.seek(SeekFrom::End(0)).map_err(|e| io_err(&files.bin_path, e))?;
            files.bin_len = 0;
        }
        Ok(())
    }
}

fn decode_entry(line: &str, data: &[u8], dim: usize) -> Option<(String, Vec<f64>)> {
    let mut parts = line.split_whitespace();
    let hash = parts.next()?;
    let offset: usize = parts.next()?.parse().ok()?;
    let entry_dim: usize = parts.next()?.parse().ok()?;
    if parts.next().is_some() || entry_dim != dim || hash.len() != 64 {
        return None;
    }
    let len = dim * 8;
    let end = offset.checked_add(len + 8)?;
    let record = data.get(offset..end)?;
    let (values, sum) = record.split_at(len);
    if checksum(values) != sum {
        return None;
    }
    let v: Vec<f64> = values.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    v.iter().all(|x| x.is_finite()).then(|| (hash.to_owned(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let key = EmbeddingCache::key("m", "solar");
        {
            let c = EmbeddingCache::open(dir.path(), "m", 2).unwrap();
            c.put_many(vec![(key.clone(), vec![0.6, 0.8])]).unwrap();
        }
        let c = EmbeddingCache::open(dir.path(), "m", 2).unwrap();
        assert_eq!(c.get(&key), Some(vec![0.6, 0.8]));
        let manifest: CacheManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("m.manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.entries, 1);
    }

    #[test]
    fn dimension_change_is_a_model_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        EmbeddingCache::open(dir.path(), "m", 2).unwrap();
        assert!(matches!(EmbeddingCache::open(dir.path(), "m", 3), Err(EmbedError::CacheModelMismatch { .. })));
    }

    #[test]
    fn corrupt_entries_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let good = EmbeddingCache::key("m", "good");
        let bad = EmbeddingCache::key("m", "bad");
        {
            let c = EmbeddingCache::open(dir.path(), "m", 2).unwrap();
            c.put_many(vec![(good.clone(), vec![1.0, 0.0]), (bad.clone(), vec![0.0, 1.0])]).unwrap();
        }
        // Flip a byte inside the second record and add a garbage index line.
        let bin = dir.path().join("m.bin");
        let mut bytes = fs::read(&bin).unwrap();
        bytes[24 + 3] ^= 0xff;
        fs::write(&bin, bytes).unwrap();
        let mut idx = OpenOptions::new().append(true).open(dir.path().join("m.idx")).unwrap();
        writeln!(idx, "zz 99999 2").unwrap();
        let c = EmbeddingCache::open(dir.path(), "m", 2).unwrap();
        assert_eq!(c.stats().dropped, 2);
        assert_eq!(c.get(&good), Some(vec![1.0, 0.0]));
        assert_eq!(c.get(&bad), None);
    }

    #[test]
    fn purge_clears_everything() {
        let dir = tempfile::tempdir().unwrap();
        let c = EmbeddingCache::open(dir.path(), "m", 1).unwrap();
        c.put_many(vec![(EmbeddingCache::key("m", "x"), vec![1.0])]).unwrap();
        c.purge().unwrap();
        assert!(c.is_empty());
        assert_eq!(c.stats().data_bytes, 0);
        c.put_many(vec![(EmbeddingCache::key("m", "y"), vec![1.0])]).unwrap();
        drop(c);
        assert_eq!(EmbeddingCache::open(dir.path(), "m", 1).unwrap().len(), 1);
    }
}
