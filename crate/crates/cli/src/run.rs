//! Output directories: one run per directory (guarded by a lock file),
//! every artifact hashed into `manifest.json`.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::UsageError;

pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".equicantor.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    /// Fully resolved settings; feeding this file back through `--config`
    /// repeats the run.
    pub config: Settings,
    pub spec: Option<equicantor::GeneratorSpec>,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<String>,
    pub outputs: Vec<Artifact>,
    pub wall_ms: f64,
    /// Optional per-step timings (per generation for `calibrate`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings_ms: Vec<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct RunDir {
    dir: PathBuf,
    lock: PathBuf,
    started: Instant,
    outputs: Vec<Artifact>,
    pub inputs: Vec<String>,
    pub timings_ms: Vec<f64>,
}

impl RunDir {
    pub fn open(dir: &Path) -> Result<RunDir> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let lock = dir.join(LOCK);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|_| {
                UsageError(format!(
                    "{} is in use by another run (remove {} if that run died)",
                    dir.display(),
                    lock.display()
                ))
            })?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            lock,
            started: Instant::now(),
            outputs: Vec::new(),
            inputs: Vec::new(),
            timings_ms: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
        self.outputs.retain(|a| a.path != name);
        self.outputs.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Renders into memory first so the recorded hash is of exactly what
    /// was written.
    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> equicantor::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn finish(
        mut self,
        subcommand: &str,
        config: Settings,
        spec: Option<equicantor::GeneratorSpec>,
    ) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            argv: std::env::args().collect(),
            seed: config.seed(),
            config,
            spec,
            threads: equicantor::par::current_threads(),
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            timings_ms: std::mem::take(&mut self.timings_ms),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Checks every artifact listed in a manifest against its recorded hash.
pub fn verify_manifest(dir: &Path) -> Result<Option<RunManifest>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(&path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    for a in &manifest.outputs {
        let bytes = fs::read(dir.join(&a.path))
            .with_context(|| format!("artifact {} listed but missing", a.path))?;
        if sha256_hex(&bytes) != a.sha256 {
            anyhow::bail!("artifact {} does not match its recorded hash", a.path);
        }
    }
    Ok(Some(manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_run_in_the_same_directory_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let first = RunDir::open(dir.path()).unwrap();
        assert!(RunDir::open(dir.path()).is_err());
        drop(first);
        assert!(RunDir::open(dir.path()).is_ok());
    }

    #[test]
    fn tampered_artifacts_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::open(dir.path()).unwrap();
        run.write("x.csv", b"a,b\n1,2\n").unwrap();
        run.finish("test", Settings::default(), None).unwrap();
        assert!(verify_manifest(dir.path()).unwrap().is_some());
        fs::write(dir.path().join("x.csv"), b"a,b\n1,3\n").unwrap();
        assert!(verify_manifest(dir.path()).is_err());
    }

    #[test]
    fn hash_is_standard_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
