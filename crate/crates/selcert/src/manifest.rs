//! Run manifests: the parameters and input digests behind an output file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io::{read_file, write_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub date_format: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub parameters: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            alpha: None,
            beta: None,
            seed: None,
            date_format: None,
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
        }
    }

    /// Records `path` with the SHA-256 of its current contents.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes = read_file(path)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(self)
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    /// Writes the manifest next to a CSV output as `<path>.manifest.json`.
    pub fn write_sidecar(&self, output: &Path) -> Result<()> {
        write_file(&sidecar_path(output), &to_json_bytes(self)?)
    }
}

pub fn sidecar_path(output: &Path) -> std::path::PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    name.into()
}

pub(crate) fn to_json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)
        .map_err(|e| crate::error::Error::Usage(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}
