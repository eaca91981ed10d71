//! Dataset library entries: `library/<scenario>/` holding capture files,
//! statistics, the anomaly ledger and a manifest with content hashes.
//!
//! Entries are write-once. They are assembled in a hidden sibling directory
//! and renamed into place, so a failed run leaves nothing behind.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::Nanos;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0} already exists; library entries are write-once")]
    Exists(PathBuf),
    #[error("{path}: invalid manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("file name {0:?} must be a plain name inside the entry")]
    BadName(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LibraryError + '_ {
    move |source| LibraryError::Io { path: path.to_path_buf(), source }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub seed: u64,
    pub duration_ns: Nanos,
    /// Hash of the fully resolved scenario document.
    pub config_hash: String,
    pub files: Vec<FileEntry>,
    /// The only field that differs between otherwise identical runs.
    pub wall_clock_ms: u64,
}

/// A file whose content no longer matches its manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrityIssue {
    pub file: String,
    pub problem: String,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<RunManifest, LibraryError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read(&path).map_err(io_err(&path))?;
        serde_json::from_slice(&text).map_err(|source| LibraryError::Manifest { path, source })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Recomputes every file hash under `dir`.
    pub fn verify(&self, dir: &Path) -> Vec<IntegrityIssue> {
        let mut out = Vec::new();
        for f in &self.files {
            match fs::read(dir.join(&f.name)) {
                Err(e) => out.push(IntegrityIssue { file: f.name.clone(), problem: format!("unreadable: {e}") }),
                Ok(b) if sha256_hex(&b) != f.sha256 => {
                    out.push(IntegrityIssue { file: f.name.clone(), problem: "content hash mismatch".into() })
                }
                Ok(_) => {}
            }
        }
        out
    }
}

/// Builds one library entry.
pub struct EntryWriter {
    target: PathBuf,
    staging: PathBuf,
    files: Vec<FileEntry>,
    committed: bool,
}

impl EntryWriter {
    /// Starts the entry `<root>/<name>`; fails if it already exists.
    pub fn create(root: &Path, name: &str) -> Result<EntryWriter, LibraryError> {
        check_name(name)?;
        let target = root.join(name);
        if target.exists() {
            return Err(LibraryError::Exists(target));
        }
        fs::create_dir_all(root).map_err(io_err(root))?;
        let staging = root.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir(&staging).map_err(io_err(&staging))?;
        Ok(EntryWriter { target, staging, files: Vec::new(), committed: false })
    }

    pub fn add(&mut self, name: &str, bytes: &[u8]) -> Result<(), LibraryError> {
        check_name(name)?;
        let path = self.staging.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.push(FileEntry { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes the manifest (its `files` are filled in here) and moves the
    /// entry into place.
    pub fn commit(self, mut manifest: RunManifest) -> Result<PathBuf, LibraryError> {
        manifest.files = self.files.clone();
        let path = self.staging.join(MANIFEST_FILE);
        fs::write(&path, manifest.to_json()).map_err(io_err(&path))?;
        self.finish()
    }

    /// Moves the entry into place without a run manifest.
    pub fn finish(mut self) -> Result<PathBuf, LibraryError> {
        if self.target.exists() {
            return Err(LibraryError::Exists(self.target.clone()));
        }
        fs::rename(&self.staging, &self.target).map_err(io_err(&self.target))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for EntryWriter {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

fn check_name(name: &str) -> Result<(), LibraryError> {
    if name.is_empty() || name.starts_with('.') || name.contains(['/', '\\']) {
        return Err(LibraryError::BadName(name.to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> RunManifest {
        RunManifest {
            scenario: "s".into(),
            seed: 1,
            duration_ns: 5,
            config_hash: sha256_hex(b"cfg"),
            files: Vec::new(),
            wall_clock_ms: 0,
        }
    }

    #[test]
    fn write_once_and_verify() {
        let root = tempfile::tempdir().unwrap();
        let mut w = EntryWriter::create(root.path(), "s").unwrap();
        w.add("a.txt", b"hello").unwrap();
        let dir = w.commit(manifest()).unwrap();
        let m = RunManifest::read(&dir).unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.files[0].sha256, sha256_hex(b"hello"));
        assert!(m.verify(&dir).is_empty());
        assert!(matches!(EntryWriter::create(root.path(), "s"), Err(LibraryError::Exists(_))));

        fs::write(dir.join("a.txt"), b"tampered").unwrap();
        let issues = m.verify(&dir);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].file, "a.txt");
    }

    #[test]
    fn abandoned_entry_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        {
            let mut w = EntryWriter::create(root.path(), "s").unwrap();
            w.add("a.txt", b"x").unwrap();
        }
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn names_stay_inside_the_entry() {
        let root = tempfile::tempdir().unwrap();
        assert!(EntryWriter::create(root.path(), "../x").is_err());
        let mut w = EntryWriter::create(root.path(), "s").unwrap();
        assert!(w.add("../escape", b"").is_err());
    }
}
