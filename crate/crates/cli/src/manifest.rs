//! Artifact manifest: sha256 of every written file.

use crate::{CliError, CliResult};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash the named files (paths relative to `dir`) into a sorted map.
pub fn build(dir: &Path, names: &[String]) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for name in names {
        let bytes = std::fs::read(dir.join(name))
            .map_err(|e| CliError::Internal(format!("hashing {name}: {e}")))?;
        map.insert(name.clone(), sha256_hex(&bytes));
    }
    Ok(map)
}
