//! Persistent enrichment cache.
//!
//! A UTF-8 text file. The first line is the version header
//! `# streetonomics enrichment cache v1`; every further line is one JSON
//! object:
//!
//! ```json
//! {"key":"rosa parks","entity_id":"Q41921","retrieved_at":"2024-05-01T12:00:00Z",
//!  "honoree":{...},"provenance":{"gender":"bindings[0].gender"}}
//! ```
//!
//! Lines are only ever appended. When a key appears more than once the last
//! line wins.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Honoree;
use crate::text::search_key;

pub const CACHE_HEADER: &str = "# streetonomics enrichment cache v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    /// Absent when the knowledge base had no matching person.
    pub entity_id: Option<String>,
    pub retrieved_at: String,
    pub honoree: Honoree,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Default)]
struct Inner {
    lines: HashMap<String, String>,
    file: Option<File>,
}

/// Name-keyed store of resolved honorees. Safe to share across threads.
#[derive(Debug, Default)]
pub struct EnrichmentCache {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl EnrichmentCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens or creates the cache file at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut lines = HashMap::new();
        match std::fs::read_to_string(path) {
            Ok(text) => {
                let mut it = text.lines();
                match it.next() {
                    Some(h) if h.trim_end() == CACHE_HEADER => {}
                    None => {}
                    Some(h) => {
                        return Err(Error::Invalid(format!(
                            "{}: not an enrichment cache (header {h:?})",
                            path.display()
                        )))
                    }
                }
                for (n, line) in it.enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let rec: CacheRecord = serde_json::from_str(line).map_err(|e| Error::Json {
                        context: format!("{} line {}", path.display(), n + 2),
                        source: e,
                    })?;
                    lines.insert(rec.key, line.to_owned());
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                std::fs::write(path, format!("{CACHE_HEADER}\n")).map_err(|e| Error::io(path, e))?;
            }
            Err(e) => return Err(Error::io(path, e)),
        }
        let meta_empty = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(false);
        if meta_empty {
            std::fs::write(path, format!("{CACHE_HEADER}\n")).map_err(|e| Error::io(path, e))?;
        }
        let file = OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(EnrichmentCache {
            path: Some(path.to_owned()),
            inner: Mutex::new(Inner {
                lines,
                file: Some(file),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Cache key for a name.
    pub fn key(name: &str) -> String {
        search_key(name)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// The stored line for `name`, exactly as written.
    pub fn raw(&self, name: &str) -> Option<String> {
        self.lock().lines.get(&Self::key(name)).cloned()
    }

    pub fn get(&self, name: &str) -> Option<CacheRecord> {
        self.raw(name)
            .map(|line| serde_json::from_str(&line).expect("cache lines are validated on write and load"))
    }

    /// Stores `record` under its key, appending it to the file and flushing.
    pub fn insert(&self, record: &CacheRecord) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| Error::Json {
            context: "cache record".into(),
            source: e,
        })?;
        let mut inner = self.lock();
        if let Some(file) = inner.file.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new("<cache>"));
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        inner.lines.insert(record.key.clone(), line);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lock().lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Gender;

    fn record(name: &str) -> CacheRecord {
        let mut h = Honoree::named(name);
        h.gender = Gender::Female;
        h.birth_year = Some(1913);
        CacheRecord {
            key: EnrichmentCache::key(name),
            entity_id: Some("Q41921".into()),
            retrieved_at: "2024-05-01T12:00:00Z".into(),
            honoree: h,
            provenance: [("gender".to_string(), "bindings[0].gender".to_string())].into(),
        }
    }

    #[test]
    fn persists_and_reloads_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/cache.jsonl");
        let cache = EnrichmentCache::open(&path).unwrap();
        assert!(cache.is_empty());
        cache.insert(&record("Rosa Parks")).unwrap();
        let first = cache.raw("rosa  PARKS").unwrap();
        drop(cache);

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CACHE_HEADER));
        let reopened = EnrichmentCache::open(&path).unwrap();
        assert_eq!(reopened.raw("Rosa Parks").unwrap(), first);
        assert_eq!(reopened.get("Rosa Parks").unwrap(), record("Rosa Parks"));
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        std::fs::write(&path, "hello\n").unwrap();
        assert!(EnrichmentCache::open(&path).is_err());
    }

    #[test]
    fn later_lines_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c");
        let cache = EnrichmentCache::open(&path).unwrap();
        cache.insert(&record("A")).unwrap();
        let mut newer = record("A");
        newer.retrieved_at = "2025-01-01T00:00:00Z".into();
        cache.insert(&newer).unwrap();
        drop(cache);
        assert_eq!(EnrichmentCache::open(&path).unwrap().get("A").unwrap(), newer);
    }
}
