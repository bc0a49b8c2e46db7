//! Certificate store: one JSON file per project, keyed by obligation name.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::sym::Verdict;

pub const CACHE_FILE: &str = "certificates.json";
/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "TLV_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".tlvcache";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub closure: String,
    pub verdict: Verdict,
    pub time_ms: f64,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertStore {
    pub tool_version: String,
    pub certificates: BTreeMap<String, Certificate>,
}

impl Default for CertStore {
    fn default() -> Self {
        CertStore {
            tool_version: crate::VERSION.to_string(),
            certificates: BTreeMap::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: malformed certificate store: {source}")]
    Format {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Cache directory: the environment override, else `configured`, else the default.
pub fn cache_dir(configured: Option<&Path>) -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => configured
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
    }
}

impl CertStore {
    /// Load the store in `dir`. A missing file or a store written by another
    /// tool version yields an empty store.
    pub fn load(dir: &Path) -> Result<CertStore, CacheError> {
        let path = dir.join(CACHE_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(CertStore::default()),
            Err(source) => return Err(CacheError::Io { path, source }),
        };
        let store: CertStore =
            serde_json::from_str(&text).map_err(|source| CacheError::Format { path, source })?;
        if store.tool_version != crate::VERSION {
            return Ok(CertStore::default());
        }
        Ok(store)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CacheError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CacheError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(CACHE_FILE);
        let tmp = dir.join(format!("{CACHE_FILE}.tmp"));
        let text = serde_json::to_string_pretty(self).expect("serializable");
        fs::write(&tmp, text).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    /// Certificate for `name`, only if it was issued for `closure`.
    pub fn lookup(&self, name: &str, closure: &str) -> Option<&Certificate> {
        self.certificates.get(name).filter(|c| c.closure == closure)
    }

    /// Record a verdict. Disproved verdicts are dropped, and any earlier
    /// certificate for the obligation with them.
    pub fn record(&mut self, name: &str, cert: Certificate) {
        if cert.verdict.is_disproved() {
            self.certificates.remove(name);
        } else {
            self.certificates.insert(name.to_string(), cert);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::Method;

    fn proved() -> Verdict {
        Verdict::Proved {
            method: Method::Normalization,
        }
    }

    #[test]
    fn round_trip_and_hash_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = CertStore::default();
        s.record(
            "a::cp",
            Certificate {
                closure: "h1".into(),
                verdict: proved(),
                time_ms: 1.0,
                level: 0,
            },
        );
        s.save(dir.path()).unwrap();
        let back = CertStore::load(dir.path()).unwrap();
        assert_eq!(back, s);
        assert!(back.lookup("a::cp", "h1").is_some());
        assert!(back.lookup("a::cp", "h2").is_none());
    }

    #[test]
    fn disproved_is_never_stored() {
        let mut s = CertStore::default();
        let c = |verdict| Certificate {
            closure: "h".into(),
            verdict,
            time_ms: 0.0,
            level: 0,
        };
        s.record("x", c(proved()));
        s.record(
            "x",
            c(Verdict::Disproved {
                witness: Default::default(),
            }),
        );
        assert!(s.certificates.is_empty());
    }

    #[test]
    fn other_tool_version_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = CertStore {
            tool_version: "0.0.0-other".into(),
            ..CertStore::default()
        };
        s.certificates.insert(
            "x".into(),
            Certificate {
                closure: "h".into(),
                verdict: proved(),
                time_ms: 0.0,
                level: 0,
            },
        );
        s.save(dir.path()).unwrap();
        assert!(CertStore::load(dir.path()).unwrap().certificates.is_empty());
    }
}
