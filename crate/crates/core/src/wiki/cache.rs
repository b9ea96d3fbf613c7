use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::PageDocument;
use crate::text::{key_form, normalize};

static TMP_SEQ: AtomicU64 = AtomicU64::new(0);

/// File stem for a title: the lowercased normalized title with spaces as
/// underscores and every byte outside `[a-z0-9_.-]` percent-encoded.
pub fn cache_file_stem(title: &str) -> String {
    let key = key_form(&normalize(title)).replace(' ', "_");
    let mut out = String::with_capacity(key.len());
    for b in key.bytes() {
        match b {
            b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-' => out.push(b as char),
            b'.' if !out.is_empty() => out.push('.'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.{}.{}.tmp", std::process::id(), TMP_SEQ.fetch_add(1, Ordering::Relaxed)));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// One JSON line per page under `<dir>/pages/`.
#[derive(Debug, Clone)]
pub struct PageCache {
    dir: PathBuf,
}

impl PageCache {
    pub fn new(cache_dir: &Path) -> Self {
        Self { dir: cache_dir.join("pages") }
    }

    pub fn path_for(&self, title: &str) -> PathBuf {
        self.dir.join(format!("{}.json", cache_file_stem(title)))
    }

    /// Missing or unreadable entries are misses; unreadable ones are logged.
    pub fn load(&self, title: &str) -> Option<PageDocument> {
        let path = self.path_for(title);
        let text = fs::read_to_string(&path).ok()?;
        match serde_json::from_str(text.trim_end()) {
            Ok(doc) => Some(doc),
            Err(e) => {
                log::warn!("ignoring corrupt page cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn store(&self, title: &str, doc: &PageDocument) -> std::io::Result<()> {
        let mut line = serde_json::to_string(doc).expect("page document serializes");
        line.push('\n');
        write_atomic(&self.path_for(title), line.as_bytes())
    }
}
