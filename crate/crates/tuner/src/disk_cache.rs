//! Append-only on-disk evaluation cache.
//!
//! A cache directory holds one file per namespace (evaluator id plus base prompt), named
//! `cache-<16 hex digits>.tsv` after the FNV-1a hash of the namespace:
//!
//! ```text
//! #pareto-tuner cache v1
//! #namespace <namespace as a JSON string>
//! <cache key>\t<time_ms>\t<quality>
//! ```
//!
//! Later lines win when a key repeats.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use pareto_tuner_core::seed::fnv1a;
use pareto_tuner_core::{CacheStore, ObjectiveVector};

pub const CACHE_HEADER: &str = "#pareto-tuner cache v1";

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
}

pub struct DiskCache {
    path: PathBuf,
    entries: BTreeMap<String, ObjectiveVector>,
    file: File,
    write_error: Option<String>,
}

impl DiskCache {
    pub fn namespace(evaluator_id: &str, base_prompt: &str) -> String {
        format!("{evaluator_id}\u{1f}{base_prompt}")
    }

    /// Opens or creates the cache file for `namespace` inside `dir`.
    pub fn open(dir: &Path, namespace: &str) -> Result<Self, CacheError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CacheError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(format!("cache-{:016x}.tsv", fnv1a(namespace.as_bytes())));
        let ns_line = format!("#namespace {}", serde_json::to_string(namespace).expect("string serializes"));
        let mut entries = BTreeMap::new();
        let fresh = !path.exists();
        if !fresh {
            let reader = BufReader::new(File::open(&path).map_err(io(&path))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io(&path))?;
                let bad = |message: String| CacheError::Format { path: path.clone(), line: i + 1, message };
                match i {
                    0 if line != CACHE_HEADER => return Err(bad(format!("expected {CACHE_HEADER:?}"))),
                    1 if line != ns_line => return Err(bad("namespace does not match".into())),
                    0 | 1 => {}
                    _ if line.is_empty() => {}
                    _ => {
                        let fields: Vec<&str> = line.split('\t').collect();
                        let [key, t, q] = fields[..] else {
                            return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
                        };
                        let t: f64 = t.parse().map_err(|_| bad(format!("bad time_ms {t:?}")))?;
                        let q: f64 = q.parse().map_err(|_| bad(format!("bad quality {q:?}")))?;
                        entries.insert(key.to_string(), ObjectiveVector::new(t, q));
                    }
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        if fresh {
            writeln!(file, "{CACHE_HEADER}\n{ns_line}").map_err(io(&path))?;
        }
        Ok(Self { path, entries, file, write_error: None })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first failed append, if any. Lookups keep working from memory after a write error.
    pub fn write_error(&self) -> Option<&str> {
        self.write_error.as_deref()
    }
}

impl CacheStore for DiskCache {
    fn get(&self, key: &str) -> Option<ObjectiveVector> {
        self.entries.get(key).copied()
    }

    fn put(&mut self, key: &str, o: ObjectiveVector) {
        if let Err(e) = writeln!(self.file, "{key}\t{}\t{}", o.time_ms, o.quality).and_then(|_| self.file.flush()) {
            self.write_error.get_or_insert_with(|| format!("{}: {e}", self.path.display()));
        }
        self.entries.insert(key.to_string(), o);
    }
}
