//! On-disk cache of periodic-point computations, keyed by a SHA-256 of the
//! inputs. Entries carry a format version; a version mismatch is a miss
//! and an unreadable entry is evicted.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Bump whenever the payload layout or the producing algorithms change.
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Lookup {
    Off,
    Hit,
    Miss,
    Evicted,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    version: u32,
    key: Value,
    payload: Value,
}

pub struct Cache {
    dir: Option<PathBuf>,
    version: u32,
    pub warnings: Vec<String>,
}

impl Cache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Cache {
            dir,
            version: CACHE_VERSION,
            warnings: Vec::new(),
        }
    }

    #[cfg(test)]
    fn with_version(dir: PathBuf, version: u32) -> Self {
        Cache {
            dir: Some(dir),
            version,
            warnings: Vec::new(),
        }
    }

    fn path_for(dir: &Path, key: &Value) -> PathBuf {
        let digest = Sha256::digest(key.to_string().as_bytes());
        dir.join(format!("{}.json", hex::encode(digest)))
    }

    /// Cached payload for `key`, or the result of `compute`, which is then
    /// stored.
    pub fn get_or_compute<T, F>(&mut self, key: Value, compute: F) -> Result<(T, Lookup)>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        let Some(dir) = self.dir.clone() else {
            return Ok((compute()?, Lookup::Off));
        };
        let path = Self::path_for(&dir, &key);
        let mut lookup = Lookup::Miss;
        if path.exists() {
            match self.read(&path, &key) {
                Ok(Some(v)) => return Ok((v, Lookup::Hit)),
                Ok(None) => {}
                Err(e) => {
                    let msg = format!("evicting corrupt cache entry {}: {e:#}", path.display());
                    eprintln!("warning: {msg}");
                    self.warnings.push(msg);
                    fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
                    lookup = Lookup::Evicted;
                }
            }
        }
        let value = compute()?;
        fs::create_dir_all(&dir).with_context(|| format!("creating cache dir {}", dir.display()))?;
        let entry = Entry {
            version: self.version,
            key,
            payload: serde_json::to_value(&value)?,
        };
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(&entry)?).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path)?;
        Ok((value, lookup))
    }

    /// `Ok(None)` for a readable entry of another version or key.
    fn read<T: DeserializeOwned>(&self, path: &Path, key: &Value) -> Result<Option<T>> {
        let bytes = fs::read(path)?;
        let entry: Entry = serde_json::from_slice(&bytes)?;
        if entry.version != self.version || &entry.key != key {
            return Ok(None);
        }
        Ok(Some(serde_json::from_value(entry.payload)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hit_miss_and_eviction() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = Cache::new(Some(dir.path().to_path_buf()));
        let key = json!({"n": 3, "tol": 1e-8});
        let (a, l): (Vec<f64>, _) = cache.get_or_compute(key.clone(), || Ok(vec![0.1, 1.0 / 3.0])).unwrap();
        assert_eq!(l, Lookup::Miss);
        let (b, l): (Vec<f64>, _) = cache.get_or_compute(key.clone(), || panic!("should hit")).unwrap();
        assert_eq!(l, Lookup::Hit);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());

        let (_, l): (Vec<f64>, _) = cache.get_or_compute(json!({"n": 3, "tol": 1e-9}), || Ok(vec![2.0])).unwrap();
        assert_eq!(l, Lookup::Miss);

        let mut bumped = Cache::with_version(dir.path().to_path_buf(), CACHE_VERSION + 1);
        let (_, l): (Vec<f64>, _) = bumped.get_or_compute(key.clone(), || Ok(vec![5.0])).unwrap();
        assert_eq!(l, Lookup::Miss);

        let path = Cache::path_for(dir.path(), &key);
        fs::write(&path, b"{not json").unwrap();
        let (v, l): (Vec<f64>, _) = cache.get_or_compute(key, || Ok(vec![7.0])).unwrap();
        assert_eq!((v, l), (vec![7.0], Lookup::Evicted));
        assert_eq!(cache.warnings.len(), 1);
    }
}
