//! On-disk formats: versioned tree documents and JSONL files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_tree, Cdt};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub schema_version: u32,
    pub tree: Cdt,
}

impl TreeDocument {
    pub fn new(tree: Cdt) -> Self {
        TreeDocument {
            schema_version: SCHEMA_VERSION,
            tree,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Checks the version before decoding the payload, then the tree's
    /// structure.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::invalid(format!("unsupported tree schema_version {v}, expected {SCHEMA_VERSION}"))),
            None => return Err(Error::invalid("tree document has no schema_version")),
        }
        let doc: TreeDocument = serde_json::from_value(raw)?;
        let problems = validate_tree(&doc.tree);
        if !problems.is_empty() {
            let list: Vec<String> = problems.iter().map(|v| format!("{}: {}", v.node_id, v.message)).collect();
            return Err(Error::invalid(format!("invalid tree: {}", list.join("; "))));
        }
        Ok(doc)
    }
}

pub fn save_tree(path: impl AsRef<Path>, tree: &Cdt) -> Result<()> {
    write_file(path, TreeDocument::new(tree.clone()).to_json()?)
}

pub fn load_tree(path: impl AsRef<Path>) -> Result<Cdt> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TreeDocument::from_json(&text)
        .map(|d| d.tree)
        .map_err(|e| e.context(path.display().to_string()))
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    write_file(path, to_jsonl(items)?)
}

/// Strict reader: any bad line fails the whole file.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::from(e).context(format!("{}:{}", path.display(), i + 1))))
        .collect()
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_vec_pretty(value)?;
    s.write_all(b"\n").expect("vec write");
    write_file(path, s)
}
