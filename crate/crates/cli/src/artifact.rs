//! Output files: metadata headers, content hashes and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "bnpmeta";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub dataset_hash: Option<String>,
}

impl Metadata {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>, dataset_hash: Option<String>) -> Result<Self> {
        Ok(Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config_hash: config_hash(config)?,
            seed,
            dataset_hash,
        })
    }

    /// `# key: value` lines for delimited and plain-text files.
    pub fn comment_block(&self, prefix: &str) -> String {
        let none = || "none".to_string();
        format!(
            "{prefix} {} {}\n{prefix} command: {}\n{prefix} config_hash: {}\n{prefix} seed: {}\n{prefix} dataset_hash: {}\n",
            self.tool,
            self.version,
            self.command,
            self.config_hash,
            self.seed.map(|s| s.to_string()).unwrap_or_else(none),
            self.dataset_hash.clone().unwrap_or_else(none),
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of a resolved configuration.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(config)?))
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

/// Collects artifacts for one command so the caller can report what was written.
pub struct Artifacts {
    pub dir: PathBuf,
    pub meta: Metadata,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    metadata: &'a Metadata,
    #[serde(flatten)]
    body: &'a T,
}

impl Artifacts {
    pub fn new(dir: &Path, meta: Metadata) -> Self {
        Self { dir: dir.to_path_buf(), meta, written: Vec::new() }
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, &bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Delimited or plain text with a leading `#` metadata block.
    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let mut s = self.meta.comment_block("#");
        s.push_str(body);
        self.put(name, s.into_bytes())
    }

    /// JSON object with a `metadata` member followed by the fields of `body`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(&Stamped { metadata: &self.meta, body })?;
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    pub fn svg(&mut self, name: &str, svg: &str) -> Result<PathBuf> {
        let body = format!("<!--\n{}-->\n{svg}", self.meta.comment_block(" "));
        self.put(name, body.into_bytes())
    }
}

/// Renders rows as comma-separated text with a header.
pub fn csv_string<S: AsRef<str>>(header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
