//! Atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::Failure;

pub const SPEC_VERSION: &str = "1.0";

pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes to a temporary file in the target directory, then renames it into place.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Failure::io(&self.dir, e))?;
        let target = self.path(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Failure::io(&self.dir, e))?;
        tmp.write_all(bytes).map_err(|e| Failure::io(&target, e))?;
        tmp.flush().map_err(|e| Failure::io(&target, e))?;
        tmp.persist(&target).map_err(|e| Failure::io(&target, e.error))?;
        Ok(target)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::invalid(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

/// Adds the version field to a manifest object.
pub fn manifest(command: &str, mut body: Value) -> Value {
    if let Value::Object(m) = &mut body {
        m.insert("spec_version".into(), Value::from(SPEC_VERSION));
        m.insert("command".into(), Value::from(command));
    }
    body
}
