//! Artifact directory plumbing: deterministic CSV/JSON writers and the run
//! manifest. All floats go through `fmt_e` so re-runs are byte-identical;
//! the manifest is written last, marking the run complete.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::errors::{art, CliResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Canonical float formatting for every CSV artifact.
pub fn fmt_e(v: f64) -> String {
    format!("{v:.12e}")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub recipe: String,
    pub seed: u64,
    pub config_sha256: String,
    pub artifacts: Vec<String>,
    pub csv_schemas: BTreeMap<String, String>,
}

pub struct ArtifactDir {
    dir: PathBuf,
    artifacts: Vec<String>,
    csv_schemas: BTreeMap<String, String>,
}

impl ArtifactDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| art(format!("{}: {e}", dir.display())))?;
        Ok(ArtifactDir { dir: dir.to_path_buf(), artifacts: Vec::new(), csv_schemas: BTreeMap::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| art(format!("{}: {e}", path.display())))?;
        self.record(name);
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> CliResult<()> {
        let mut text = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        self.csv_schemas.insert(name.to_string(), header.to_string());
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_results(&mut self, metrics: &BTreeMap<String, f64>) -> CliResult<()> {
        #[derive(Serialize)]
        struct Results<'a> {
            metrics: &'a BTreeMap<String, f64>,
        }
        let mut text = serde_json::to_string_pretty(&Results { metrics }).map_err(art)?;
        text.push('\n');
        self.write_bytes("results.json", text.as_bytes())
    }

    /// Write the manifest and consume the directory handle.
    pub fn finish(mut self, recipe: &str, seed: u64, config_sha256: &str) -> CliResult<()> {
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            recipe: recipe.to_string(),
            seed,
            config_sha256: config_sha256.to_string(),
            artifacts: std::mem::take(&mut self.artifacts),
            csv_schemas: std::mem::take(&mut self.csv_schemas),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(art)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| art(format!("{}: {e}", path.display())))
    }
}

pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| art(format!("{}: {e} (is this a completed run directory?)", path.display())))?;
    serde_json::from_str(&text).map_err(|e| art(format!("{}: corrupt manifest: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in out {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}
