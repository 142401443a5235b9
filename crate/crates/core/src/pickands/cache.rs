//! JSON-lines cache of constant estimates keyed by a content hash of the request.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ConstantKind, FunctionalDescriptor, PickandsEstimate, ProcessDescriptor};
use crate::Result;

#[derive(Serialize, Deserialize)]
struct Line {
    key: String,
    record: PickandsEstimate,
}

/// Hex SHA-256 of everything that determines an estimate.
pub fn cache_key(
    v: &ProcessDescriptor,
    phi: &FunctionalDescriptor,
    constant: ConstantKind,
    meshes: &[f64],
    schedule: &[f64],
    n: u64,
    seed: u64,
) -> String {
    let request = serde_json::json!({
        "V": v,
        "functional": phi,
        "constant": constant,
        "meshes": meshes,
        "schedule": schedule,
        "n": n,
        "seed": seed,
        "version": 1,
    });
    let digest = Sha256::digest(request.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Append-only cache file; later lines win on duplicate keys.
#[derive(Debug)]
pub struct PickandsCache {
    path: PathBuf,
    entries: HashMap<String, PickandsEstimate>,
}

impl PickandsCache {
    /// Loads `path`, which need not exist yet.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let l: Line = serde_json::from_str(&line)?;
                entries.insert(l.key, l.record);
            }
        }
        Ok(PickandsCache { path, entries })
    }

    pub fn get(&self, key: &str) -> Option<&PickandsEstimate> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: String, record: PickandsEstimate) -> Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let line = serde_json::to_string(&Line { key: key.clone(), record: record.clone() })?;
        writeln!(f, "{line}")?;
        self.entries.insert(key, record);
        Ok(())
    }
}
