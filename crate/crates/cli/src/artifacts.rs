use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Collects the files of one run and writes `manifest.json` last.
pub struct RunOutput {
    dir: PathBuf,
    files: Vec<(String, String)>,
    started: Instant,
    started_at: u64,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let started_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            started_at,
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push((
            name.to_string(),
            hex::encode(Sha256::digest(contents.as_bytes())),
        ));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes the manifest. `resolved` echoes the fully resolved config;
    /// the reproducibility hash covers it and every output, but not the
    /// timing fields.
    pub fn finish(self, subcommand: &str, resolved: Value, summary: Value) -> Result<()> {
        let mut files = self.files.clone();
        files.sort();
        let mut hasher = Sha256::new();
        hasher.update(subcommand.as_bytes());
        hasher.update(serde_json::to_vec(&resolved)?);
        hasher.update(serde_json::to_vec(&summary)?);
        for (name, digest) in &files {
            hasher.update(name.as_bytes());
            hasher.update(digest.as_bytes());
        }
        let manifest = json!({
            "tool": "varmem",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "config": resolved,
            "summary": summary,
            "outputs": files.iter().map(|(n, h)| json!({"file": n, "sha256": h})).collect::<Vec<_>>(),
            "reproducibility_hash": hex::encode(hasher.finalize()),
            "started_at_unix": self.started_at,
            "runtime_seconds": self.started.elapsed().as_secs_f64(),
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
