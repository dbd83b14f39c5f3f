//! Output metadata, content hashes and stage manifests.
//!
//! Every stage output carries a metadata block: the tool version, the hash
//! and full text of the config, the effective settings and the SHA-256 of
//! every input. JSON outputs hold it under a top-level `meta` key; CSV
//! outputs start with `#` comment lines.
//!
//! Each stage also writes `<stage>/<city>.manifest.json` with a key derived
//! from the metadata and the hashes of the files it wrote. When the key and
//! the output hashes still match, the stage is skipped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{EffectiveSettings, RunConfig};

pub const TOOL: &str = "streetonomics";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Metadata shared by every output of one stage run for one city.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub stage: String,
    pub city: String,
    pub config_hash: String,
    pub settings: EffectiveSettings,
    /// Input label to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub config: String,
}

impl Meta {
    pub fn new(cfg: &RunConfig, stage: &str, city: &str) -> Self {
        Meta {
            tool: TOOL,
            version: VERSION,
            stage: stage.into(),
            city: city.into(),
            config_hash: cfg.config_hash.clone(),
            settings: cfg.settings.clone(),
            inputs: BTreeMap::new(),
            config: cfg.raw.clone(),
        }
    }

    /// Hashes `path` and records it under `label`.
    pub fn input(&mut self, label: &str, path: &Path) -> anyhow::Result<()> {
        self.inputs.insert(label.to_owned(), hash_file(path)?);
        Ok(())
    }

    /// Stage key: changes whenever any recorded input or setting changes.
    pub fn key(&self) -> String {
        let v = serde_json::to_vec(self).expect("meta serializes");
        sha256_hex(&v)
    }

    /// `#` comment lines for CSV outputs.
    pub fn csv_preamble(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# tool: {} {}\n", self.tool, self.version));
        out.push_str(&format!("# stage: {}\n", self.stage));
        out.push_str(&format!("# city: {}\n", self.city));
        out.push_str(&format!("# config_hash: {}\n", self.config_hash));
        out.push_str(&format!(
            "# settings: {}\n",
            serde_json::to_string(&self.settings).expect("settings serialize")
        ));
        for (label, hash) in &self.inputs {
            out.push_str(&format!("# input: {label} sha256:{hash}\n"));
        }
        for line in self.config.lines() {
            out.push_str(&format!("# config| {line}\n"));
        }
        out
    }
}

/// Wraps `body` as `{"meta": ..., ...body}`. `body` must be a JSON object.
pub fn with_meta(meta: &Meta, body: Value) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("meta".into(), serde_json::to_value(meta).expect("meta serializes"));
    match body {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("data".into(), other);
        }
    }
    Value::Object(obj)
}

pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub city: String,
    pub key: String,
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

/// Collects the files of one stage run and writes them with a manifest.
pub struct StageWriter<'a> {
    out_dir: &'a Path,
    meta: Meta,
    files: BTreeMap<String, Vec<u8>>,
}

impl<'a> StageWriter<'a> {
    pub fn new(out_dir: &'a Path, meta: Meta) -> Self {
        StageWriter {
            out_dir,
            meta,
            files: BTreeMap::new(),
        }
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn add(&mut self, rel: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(rel.into(), bytes);
    }

    pub fn add_json(&mut self, rel: impl Into<String>, body: Value) {
        let v = with_meta(&self.meta, body);
        self.add(rel, json_bytes(&v));
    }

    fn manifest_path(out_dir: &Path, stage: &str, city: &str) -> PathBuf {
        out_dir.join(stage).join(format!("{city}.manifest.json"))
    }

    /// Writes every file and the manifest. Stale files listed by an older
    /// manifest for the same stage and city are removed.
    pub fn commit(self) -> anyhow::Result<Manifest> {
        let mpath = Self::manifest_path(self.out_dir, &self.meta.stage, &self.meta.city);
        if let Some(old) = read_manifest(&mpath) {
            for rel in old.outputs.keys().filter(|r| !self.files.contains_key(*r)) {
                let _ = std::fs::remove_file(self.out_dir.join(rel));
            }
        }
        let mut outputs = BTreeMap::new();
        for (rel, bytes) in &self.files {
            let path = self.out_dir.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            outputs.insert(rel.clone(), sha256_hex(bytes));
        }
        let manifest = Manifest {
            stage: self.meta.stage.clone(),
            city: self.meta.city.clone(),
            key: self.meta.key(),
            inputs: self.meta.inputs.clone(),
            outputs,
        };
        let bytes = json_bytes(&serde_json::to_value(&manifest).expect("manifest serializes"));
        std::fs::write(&mpath, bytes).with_context(|| format!("writing {}", mpath.display()))?;
        Ok(manifest)
    }
}

fn read_manifest(path: &Path) -> Option<Manifest> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// The stored manifest if it matches `meta` and every output is intact.
pub fn up_to_date(out_dir: &Path, meta: &Meta) -> Option<Manifest> {
    let m = read_manifest(&StageWriter::manifest_path(out_dir, &meta.stage, &meta.city))?;
    if m.key != meta.key() {
        return None;
    }
    for (rel, hash) in &m.outputs {
        match hash_file(&out_dir.join(rel)) {
            Ok(h) if &h == hash => {}
            _ => return None,
        }
    }
    Some(m)
}

/// SHA-256 of every file under the given subdirectories of `out_dir`.
pub fn file_listing(out_dir: &Path, roots: &[&str]) -> anyhow::Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    for root in roots {
        let dir = out_dir.join(root);
        if dir.is_dir() {
            walk(out_dir, &dir, &mut files)?;
        }
    }
    Ok(files)
}

fn walk(base: &Path, dir: &Path, files: &mut BTreeMap<String, String>) -> anyhow::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            walk(base, &path, files)?;
        } else {
            let rel = path
                .strip_prefix(base)
                .expect("walked under base")
                .to_string_lossy()
                .replace('\\', "/");
            files.insert(rel, hash_file(&path)?);
        }
    }
    Ok(())
}

pub fn listing_json(files: &BTreeMap<String, String>) -> Value {
    json!({ "files": files })
}
