use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub logits_path: PathBuf,
    pub labels_path: Option<PathBuf>,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub schema_version: u64,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn validation(&self) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.role == Role::Validation)
    }

    pub fn tests(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.role == Role::Test)
    }
}

/// Parses and validates a manifest. Relative paths are resolved against
/// the manifest's directory. Errors carry a JSON pointer to the offending
/// value.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let err = |pointer: &str, message: String| Error::Manifest {
        path: path.to_path_buf(),
        pointer: pointer.to_string(),
        message,
    };

    let root: Value = serde_json::from_str(&text).map_err(|e| err("", format!("invalid JSON: {e}")))?;
    let obj = root.as_object().ok_or_else(|| err("", "expected an object".into()))?;

    let version = obj
        .get("schema_version")
        .ok_or_else(|| err("/schema_version", "missing".into()))?
        .as_u64()
        .ok_or_else(|| err("/schema_version", "expected a nonnegative integer".into()))?;
    if version != SCHEMA_VERSION {
        return Err(err("/schema_version", format!("unsupported version {version}, expected {SCHEMA_VERSION}")));
    }

    let list = obj
        .get("entries")
        .ok_or_else(|| err("/entries", "missing".into()))?
        .as_array()
        .ok_or_else(|| err("/entries", "expected an array".into()))?;

    let mut ids = HashSet::new();
    let mut entries = Vec::with_capacity(list.len());
    let mut validation_at: Option<usize> = None;
    for (i, item) in list.iter().enumerate() {
        let at = |field: &str| format!("/entries/{i}{field}");
        let e = item.as_object().ok_or_else(|| err(&at(""), "expected an object".into()))?;
        let string_field = |name: &str, required: bool| -> Result<Option<String>> {
            match e.get(name) {
                None | Some(Value::Null) if !required => Ok(None),
                None => Err(err(&at(&format!("/{name}")), "missing".into())),
                Some(Value::String(s)) if s.is_empty() => {
                    Err(err(&at(&format!("/{name}")), "must not be empty".into()))
                }
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(err(&at(&format!("/{name}")), "expected a string".into())),
            }
        };
        let id = string_field("id", true)?.unwrap();
        if !ids.insert(id.clone()) {
            return Err(err(&at("/id"), format!("duplicate id '{id}'")));
        }
        let logits = string_field("logits", true)?.unwrap();
        let labels = string_field("labels", false)?;
        let role = match string_field("role", false)?.as_deref() {
            None | Some("test") => Role::Test,
            Some("validation") => Role::Validation,
            Some(other) => {
                return Err(err(&at("/role"), format!("expected 'validation' or 'test', got '{other}'")))
            }
        };
        if role == Role::Validation {
            if let Some(first) = validation_at {
                return Err(err(
                    &at("/role"),
                    format!("second validation entry (first is /entries/{first})"),
                ));
            }
            validation_at = Some(i);
        }
        for key in e.keys() {
            if !matches!(key.as_str(), "id" | "logits" | "labels" | "role") {
                return Err(err(&at(&format!("/{key}")), "unknown field".into()));
            }
        }
        entries.push(ManifestEntry {
            id,
            logits_path: base.join(logits),
            labels_path: labels.map(|l| base.join(l)),
            role,
        });
    }
    Ok(DatasetManifest { schema_version: version, entries })
}

/// Writes a manifest, storing paths relative to `path`'s directory when
/// they live under it.
pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let rel = |p: &Path| -> String {
        p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/")
    };
    let entries: Vec<Value> = manifest
        .entries
        .iter()
        .map(|e| {
            let mut m = Map::new();
            m.insert("id".into(), json!(e.id));
            m.insert("logits".into(), json!(rel(&e.logits_path)));
            if let Some(l) = &e.labels_path {
                m.insert("labels".into(), json!(rel(l)));
            }
            m.insert("role".into(), json!(e.role));
            Value::Object(m)
        })
        .collect();
    let doc = json!({ "schema_version": manifest.schema_version, "entries": entries });
    let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("manifest.json");
        fs::write(&p, text).unwrap();
        p
    }

    fn pointer_of(e: Error) -> String {
        match e {
            Error::Manifest { pointer, .. } => pointer,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn minimal_manifest() {
        let d = tempfile::tempdir().unwrap();
        let p = write(
            d.path(),
            r#"{"schema_version":1,"entries":[{"id":"cifar10c-fog-3","logits":"logits/fog3.npy","labels":"labels/fog3.npy","role":"test"}]}"#,
        );
        let m = read_manifest(&p).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].logits_path, d.path().join("logits/fog3.npy"));
        assert_eq!(m.entries[0].role, Role::Test);
        assert!(m.validation().is_none());
    }

    #[test]
    fn duplicate_ids() {
        let d = tempfile::tempdir().unwrap();
        let p = write(
            d.path(),
            r#"{"schema_version":1,"entries":[{"id":"a","logits":"a.npy"},{"id":"a","logits":"b.npy"}]}"#,
        );
        assert_eq!(pointer_of(read_manifest(&p).unwrap_err()), "/entries/1/id");
    }

    #[test]
    fn two_validation_entries() {
        let d = tempfile::tempdir().unwrap();
        let p = write(
            d.path(),
            r#"{"schema_version":1,"entries":[
                {"id":"a","logits":"a.npy","role":"validation"},
                {"id":"b","logits":"b.npy","role":"validation"}]}"#,
        );
        assert_eq!(pointer_of(read_manifest(&p).unwrap_err()), "/entries/1/role");
    }

    #[test]
    fn schema_violations() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), r#"{"schema_version":2,"entries":[]}"#);
        assert_eq!(pointer_of(read_manifest(&p).unwrap_err()), "/schema_version");
        let p = write(d.path(), r#"{"schema_version":1,"entries":[{"id":"a","logits":""}]}"#);
        assert_eq!(pointer_of(read_manifest(&p).unwrap_err()), "/entries/0/logits");
        let p = write(d.path(), r#"{"schema_version":1,"entries":[{"id":"a","logits":"x","role":"train"}]}"#);
        assert_eq!(pointer_of(read_manifest(&p).unwrap_err()), "/entries/0/role");
    }

    #[test]
    fn write_then_read() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("manifest.json");
        let m = DatasetManifest {
            schema_version: 1,
            entries: vec![
                ManifestEntry {
                    id: "val".into(),
                    logits_path: d.path().join("logits/val.npy"),
                    labels_path: Some(d.path().join("labels/val.npy")),
                    role: Role::Validation,
                },
                ManifestEntry {
                    id: "t".into(),
                    logits_path: d.path().join("logits/t.npy"),
                    labels_path: None,
                    role: Role::Test,
                },
            ],
        };
        write_manifest(&p, &m).unwrap();
        assert!(fs::read_to_string(&p).unwrap().contains("\"logits/val.npy\""));
        assert_eq!(read_manifest(&p).unwrap(), m);
    }
}
